"""
Energy-orthogonal projections π_t, π*_t and π̄_t realized by discrete harmonic extension.

All projections are orthogonal in the propagator's conserved energy ⟨f, g⟩ = f₀ᵀK̃g₀ + f₁ᵀMg₁,
so "harmonic" means K̃-harmonic: K̃e = 0 at the nodes being extended to.
"""

from dataclasses import dataclass, field
from logging import getLogger

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, factorized

from models.fields import CauchyData
from pipeline.geometry_depth import DepthField, level_mask
from pipeline.wave_solver import Propagator

logger = getLogger("sclab")

SOLVERS = ("direct", "cg")


@dataclass
class HarmonicExtender:
    """
    Sparse Dirichlet problem K̃_FF e_F = −K̃_FC u_C for one level t.

    Attributes:
        level (float): The level t of Θ_t.
        inside (np.ndarray): Interior-vector indices C of Θ_t.
        outside (np.ndarray): Interior-vector indices F of Θ*_t.
        solver (str): "cg" (default) or "direct" (sparse LU).
        rtol (float): CG relative residual.
        maxiter (int): CG iteration cap.
    """

    level: float
    inside: np.ndarray
    outside: np.ndarray
    matrix: sp.csr_matrix
    solver: str = "cg"
    rtol: float = 1e-10
    maxiter: int = 20_000
    _solve: object = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.coupling = self.matrix[self.outside][:, self.inside].tocsr()
        self.block = self.matrix[self.outside][:, self.outside].tocsc()
        if self.solver == "direct" and self.outside.size:
            logger.info(f"Factorizing {self.outside.size}-node extension system at level {self.level:.6g}")
            self._solve = factorized(self.block)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Raises:
            RuntimeError: If CG does not reach the tolerance within maxiter iterations.
        """
        if not self.outside.size or not np.any(rhs):
            return np.zeros(self.outside.size)
        if self.solver == "direct":
            return np.asarray(self._solve(rhs))  # type: ignore[operator]
        x, info = cg(self.block, rhs, rtol=self.rtol, atol=0.0, maxiter=self.maxiter)
        if info != 0:
            logger.error(f"CG failed at level {self.level:.6g} (info={info})")
            raise RuntimeError(
                f"Harmonic extension did not converge at level {self.level:.6g} "
                f"(rtol={self.rtol}, maxiter={self.maxiter}, info={info})"
            )
        return np.asarray(x)

    def extension(self, u: np.ndarray) -> np.ndarray:
        """Harmonic extension to F of the values u_C, as a full interior vector (u_C kept)."""
        out = np.zeros_like(u)
        out[self.inside] = u[self.inside]
        out[self.outside] = self.solve(-(self.coupling @ u[self.inside]))
        return out


class Projector:
    """
    Projections onto data inside / outside the level sets Θ_t of a depth field.

    Args:
        propagator (Propagator): Supplies the energy geometry.
        depth (DepthField): Signed depth d*_Θ.
        solver (str): "cg" or "direct".
        rtol (float): CG relative residual.
        maxiter (int): CG iteration cap.
    """

    def __init__(
        self,
        propagator: Propagator,
        depth: DepthField,
        solver: str = "cg",
        rtol: float = 1e-10,
        maxiter: int = 20_000,
    ) -> None:
        if solver not in SOLVERS:
            raise ValueError(f"Unknown projection solver {solver!r}; expected one of {SOLVERS}")
        if depth.grid != propagator.grid:
            raise ValueError("Depth field and propagator live on different grids")
        self.propagator = propagator
        self.depth = depth
        self.solver = solver
        self.rtol = rtol
        self.maxiter = maxiter
        self._extenders: dict[float, HarmonicExtender] = {}
        self._interiors: dict[float, tuple[np.ndarray, np.ndarray, object]] = {}

    @property
    def T(self) -> float:
        return self.propagator.T

    def mask(self, t: float, side: str = "inside") -> np.ndarray:
        return level_mask(self.depth, t, side)

    def extender(self, t: float) -> HarmonicExtender:
        key = round(float(t), 12)
        if key not in self._extenders:
            inside = self.mask(t).ravel()[self.propagator.interior]
            self._extenders[key] = HarmonicExtender(
                level=float(t),
                inside=np.flatnonzero(inside),
                outside=np.flatnonzero(~inside),
                matrix=self.propagator.energy_matrix,
                solver=self.solver,
                rtol=self.rtol,
                maxiter=self.maxiter,
            )
        return self._extenders[key]

    def project_inside(self, h: CauchyData, t: float = 0.0) -> CauchyData:
        """π̄_t h: h on Θ_t, harmonic extension of u and zero velocity on Θ*_t."""
        if h.is_zero():
            return CauchyData.zeros(h.grid)
        ext = self.extender(t)
        u, v = self.propagator.to_vectors(h)
        w = ext.extension(u)
        v_out = np.zeros_like(v)
        v_out[ext.inside] = v[ext.inside]
        return self.propagator.from_vectors(w, v_out)

    def project_outside(self, h: CauchyData, t: float = 0.0) -> CauchyData:
        """π*_t h = h − π̄_t h; vanishes on Θ_t."""
        return h - self.project_inside(h, t)

    def _interior_system(self, t: float) -> tuple[np.ndarray, np.ndarray, object]:
        key = round(float(t), 12)
        if key not in self._interiors:
            ext = self.extender(t)
            matrix = self.propagator.energy_matrix
            coupled = np.zeros(matrix.shape[0], dtype=bool)
            if ext.outside.size:
                touched = matrix[ext.outside].tocsr()
                coupled[touched.indices] = True
            is_inside = np.zeros(matrix.shape[0], dtype=bool)
            is_inside[ext.inside] = True
            core = np.flatnonzero(is_inside & ~coupled)
            solve = factorized(matrix[core][:, core].tocsc()) if core.size else None
            self._interiors[key] = (ext.inside, core, solve)
        return self._interiors[key]

    def project_interior(self, h: CauchyData, t: float = 0.0) -> CauchyData:
        """
        π_t h: the part of h vanishing (with its coupling stencil) outside Θ_t, harmonic part removed.
        The velocity is kept on Θ_t.
        """
        inside, core, solve = self._interior_system(t)
        u, v = self.propagator.to_vectors(h)
        w = np.zeros_like(u)
        if core.size:
            rhs = (self.propagator.energy_matrix @ u)[core]
            w[core] = solve(rhs)  # type: ignore[operator]
        v_out = np.zeros_like(v)
        v_out[inside] = v[inside]
        return self.propagator.from_vectors(w, v_out)

    def complementary(self, h: CauchyData, t: float = 0.0) -> CauchyData:
        """(I − π_t − π*_t) h, stationary harmonic on Θ_t and Θ*_t."""
        return h - self.project_interior(h, t) - self.project_outside(h, t)


def stationary_harmonic_residual(h: CauchyData, mask: np.ndarray, propagator: Propagator) -> float:
    """
    max over W of |K̃u| per cell volume plus max over W of |v|; zero iff h is discretely
    stationary harmonic on W.
    """
    h.u0.check_grid(mask)
    u, v = propagator.to_vectors(h)
    selected = mask.ravel()[propagator.interior]
    if not np.any(selected):
        return 0.0
    laplacian = np.abs(propagator.energy_matrix @ u)[selected] / propagator.grid.cell_volume
    return float(laplacian.max() + np.abs(v[selected]).max())
