"""
Uniform-grid containers shared by every numerical module: grid descriptors, scalar fields,
Cauchy data, media (with optional layered descriptors) and nested domain masks.
"""

from dataclasses import dataclass
from logging import getLogger
from typing import Mapping, Sequence

import numpy as np

logger = getLogger("sclab")

# Relative tolerance (in units of grid spacing) for deciding that a node lies on a box face or an interface.
NODE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """
    Descriptor of an n-dimensional uniform grid over the box Υ.

    Attributes:
        extent (tuple[int, ...]): Node counts per axis.
        spacing (float): Length per cell (identical on all axes).
        origin (tuple[float, ...]): Position of the first node.
    """

    extent: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.extent) not in (1, 2):
            raise ValueError(f"Only 1D and 2D grids are supported, got {len(self.extent)}D")
        if len(self.origin) != len(self.extent):
            raise ValueError("Grid origin and extent must have the same dimension")
        if not self.spacing > 0:
            raise ValueError(f"Grid spacing must be positive, got {self.spacing}")
        if any(n < 3 for n in self.extent):
            raise ValueError(f"Every axis needs at least 3 nodes, got {self.extent}")

    @classmethod
    def from_bounds(
        cls, lower: Sequence[float], upper: Sequence[float], spacing: float
    ) -> "GridSpec":
        """
        Builds the grid whose first and last nodes sit on the corners of the box [lower, upper].

        Raises:
            ValueError: If a box side is not an integer number of cells.
        """
        extent = []
        for lo, hi in zip(lower, upper):
            cells = (hi - lo) / spacing
            if abs(cells - round(cells)) > 1e-6:
                raise ValueError(
                    f"Box side [{lo}, {hi}] is not a whole number of cells of spacing {spacing}"
                )
            extent.append(int(round(cells)) + 1)
        return cls(tuple(extent), float(spacing), tuple(float(v) for v in lower))

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extent

    @property
    def size(self) -> int:
        return int(np.prod(self.extent))

    @property
    def cell_volume(self) -> float:
        return float(self.spacing**self.dim)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + (n - 1) * self.spacing for o, n in zip(self.origin, self.extent))

    def coordinates(self) -> list[np.ndarray]:
        """Node coordinates along each axis."""
        return [o + np.arange(n) * self.spacing for o, n in zip(self.origin, self.extent)]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coordinates(), indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        """Nodes on ∂Υ (first or last index along any axis)."""
        mask = np.zeros(self.extent, dtype=bool)
        for axis in range(self.dim):
            index: list[slice | int] = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        return mask

    def box_mask(self, lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
        """Nodes inside the closed box [lower, upper]."""
        tol = NODE_TOLERANCE * self.spacing
        mask = np.ones(self.extent, dtype=bool)
        for axis, coord in enumerate(self.mesh()):
            mask &= (coord >= lower[axis] - tol) & (coord <= upper[axis] + tol)
        return mask

    def nearest_index(self, point: Sequence[float]) -> tuple[int, ...]:
        index = []
        for o, n, x in zip(self.origin, self.extent, point):
            i = int(round((x - o) / self.spacing))
            if not 0 <= i < n:
                raise ValueError(f"Point {tuple(point)} lies outside the grid")
            index.append(i)
        return tuple(index)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Real values on a uniform grid. Values are copied on construction and frozen.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"Field shape {values.shape} does not match grid extent {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def check_grid(self, other: "ScalarField | CauchyData | np.ndarray") -> None:
        """
        Raises:
            ValueError: If the other object lives on a different grid.
        """
        if isinstance(other, np.ndarray):
            if other.shape != self.grid.shape:
                raise ValueError(f"Mask shape {other.shape} does not match grid {self.grid.shape}")
            return
        if other.grid != self.grid:
            raise ValueError(f"Grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self.check_grid(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self.check_grid(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class CauchyData:
    """
    Element h = (h₀, h₁) of the discrete energy space: pressure and its time derivative.
    Both components vanish on ∂Υ (zero-Dirichlet nodes are not part of the energy space).
    """

    u0: ScalarField
    u1: ScalarField

    def __post_init__(self) -> None:
        self.u0.check_grid(self.u1)
        boundary = self.u0.grid.boundary_mask()
        if np.any(self.u0.values[boundary] != 0.0) or np.any(self.u1.values[boundary] != 0.0):
            raise ValueError("Cauchy data must vanish on the boundary of Υ")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "CauchyData":
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_arrays(cls, grid: GridSpec, u0: np.ndarray, u1: np.ndarray) -> "CauchyData":
        return cls(ScalarField(grid, u0), ScalarField(grid, u1))

    @property
    def grid(self) -> GridSpec:
        return self.u0.grid

    def __add__(self, other: "CauchyData") -> "CauchyData":
        return CauchyData(self.u0 + other.u0, self.u1 + other.u1)

    def __sub__(self, other: "CauchyData") -> "CauchyData":
        return CauchyData(self.u0 - other.u0, self.u1 - other.u1)

    def __mul__(self, scalar: float) -> "CauchyData":
        return CauchyData(self.u0 * scalar, self.u1 * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "CauchyData":
        return CauchyData(-self.u0, -self.u1)

    def is_zero(self) -> bool:
        return not (np.any(self.u0.values) or np.any(self.u1.values))


@dataclass(frozen=True)
class LayeredProfile:
    """
    Piecewise-constant speed along one axis: speeds[i] holds between interfaces[i-1] and interfaces[i].
    A node lying exactly on an interface takes the speed of the layer beyond it.
    """

    interfaces: tuple[float, ...]
    speeds: tuple[float, ...]
    axis: int = -1

    def __post_init__(self) -> None:
        if len(self.speeds) != len(self.interfaces) + 1:
            raise ValueError(
                f"A layered medium with {len(self.interfaces)} interfaces needs "
                f"{len(self.interfaces) + 1} speeds, got {len(self.speeds)}"
            )
        if any(b <= a for a, b in zip(self.interfaces, self.interfaces[1:])):
            raise ValueError(f"Interfaces must be strictly increasing, got {self.interfaces}")
        if any(not c > 0 for c in self.speeds):
            raise ValueError(f"Layer speeds must be positive, got {self.speeds}")

    def layer_index(self, coord: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return np.searchsorted(np.asarray(self.interfaces, dtype=float), coord + tol, side="right")

    def speed_at(self, coord: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return np.asarray(self.speeds, dtype=float)[self.layer_index(np.asarray(coord), tol)]

    def mean_slowness_squared(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """Exact average of c⁻² over the intervals [lower, upper]."""
        bounds = np.concatenate(([-np.inf], np.asarray(self.interfaces, dtype=float), [np.inf]))
        total = np.zeros_like(lower, dtype=float)
        for i, c in enumerate(self.speeds):
            overlap = np.clip(np.minimum(upper, bounds[i + 1]) - np.maximum(lower, bounds[i]), 0.0, None)
            total += overlap / c**2
        return total / (upper - lower)

    def travel_time(self, a: float, b: float) -> float:
        """∫ c⁻¹ along the layered axis from a to b (signed)."""
        lo, hi = min(a, b), max(a, b)
        bounds = [-np.inf, *self.interfaces, np.inf]
        total = 0.0
        for i, c in enumerate(self.speeds):
            overlap = min(hi, bounds[i + 1]) - max(lo, bounds[i])
            if overlap > 0:
                total += overlap / c
        return total if b >= a else -total


@dataclass(frozen=True, eq=False)
class Medium:
    """
    Wave speed on the grid, optionally backed by a layered descriptor which it must rasterize to exactly.
    """

    c: ScalarField
    layered: LayeredProfile | None = None

    def __post_init__(self) -> None:
        if not np.all(self.c.values > 0):
            raise ValueError("Wave speed must be positive everywhere")
        if self.layered is not None:
            expected = self._rasterize(self.c.grid, self.layered)
            if not np.array_equal(expected, self.c.values):
                raise ValueError("Layered descriptor does not rasterize to the given speed field")

    @staticmethod
    def _layer_axis(grid: GridSpec, profile: LayeredProfile) -> int:
        axis = profile.axis % grid.dim
        return axis

    @classmethod
    def _rasterize(cls, grid: GridSpec, profile: LayeredProfile) -> np.ndarray:
        coord = grid.mesh()[cls._layer_axis(grid, profile)]
        return profile.speed_at(coord, NODE_TOLERANCE * grid.spacing)

    @classmethod
    def constant(cls, grid: GridSpec, speed: float = 1.0) -> "Medium":
        return cls(ScalarField.constant(grid, speed))

    @classmethod
    def from_layers(cls, grid: GridSpec, profile: LayeredProfile) -> "Medium":
        return cls(ScalarField(grid, cls._rasterize(grid, profile)), profile)

    @property
    def grid(self) -> GridSpec:
        return self.c.grid

    @property
    def max_speed(self) -> float:
        return float(np.max(self.c.values))

    @property
    def singular_support(self) -> tuple[float, ...]:
        return self.layered.interfaces if self.layered is not None else ()

    def mass_slowness(self) -> np.ndarray:
        """
        Dual-cell average of c⁻² per node: exact for layered media, nodal otherwise.
        """
        if self.layered is None:
            return np.asarray(1.0 / self.c.values**2)
        grid = self.grid
        axis = self._layer_axis(grid, self.layered)
        coord = grid.mesh()[axis]
        half = 0.5 * grid.spacing
        return self.layered.mean_slowness_squared(coord - half, coord + half)


# Domain names in nesting order, innermost first.
NEST_ORDER = ("omega", "theta_prime", "theta_dprime", "theta")
NEST_SYMBOLS = {"omega": "Ω", "theta_prime": "Θ′", "theta_dprime": "Θ″", "theta": "Θ"}


@dataclass(frozen=True, eq=False)
class DomainNest:
    """
    Boolean masks of the nested domains Ω ⊆ Θ′ ⊆ Θ″ ⊆ Θ ⊆ Υ and the control time T.
    """

    grid: GridSpec
    omega: np.ndarray
    theta_prime: np.ndarray
    theta_dprime: np.ndarray
    theta: np.ndarray
    T: float

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"Control time T must be positive, got {self.T}")
        masks = [getattr(self, name) for name in NEST_ORDER]
        for name, mask in zip(NEST_ORDER, masks):
            if mask.shape != self.grid.shape or mask.dtype != bool:
                raise ValueError(f"Mask {name} must be a boolean array of shape {self.grid.shape}")
        for (inner, a), (outer, b) in zip(zip(NEST_ORDER, masks), zip(NEST_ORDER[1:], masks[1:])):
            if np.any(a & ~b):
                raise ValueError(
                    f"Domain nesting violated: {NEST_SYMBOLS[inner]} ⊆ {NEST_SYMBOLS[outer]}"
                )
        if not np.any(self.theta):
            raise ValueError("Θ contains no grid nodes")
        if np.any(self.theta & self.grid.boundary_mask()):
            raise ValueError("Domain nesting violated: Θ̄ must lie strictly inside Υ")

    @classmethod
    def from_boxes(
        cls,
        grid: GridSpec,
        boxes: Mapping[str, tuple[Sequence[float], Sequence[float]]],
        T: float,
    ) -> "DomainNest":
        """
        Builds masks from closed boxes; missing inner domains default to the next outer one.
        """
        if "theta" not in boxes:
            raise ValueError("The box of Θ is required")
        masks: dict[str, np.ndarray] = {}
        outer = grid.box_mask(*boxes["theta"])
        for name in reversed(NEST_ORDER):
            if name in boxes:
                outer = grid.box_mask(*boxes[name])
            masks[name] = outer
        return cls(grid=grid, T=float(T), **masks)

    @property
    def upsilon(self) -> np.ndarray:
        return np.ones(self.grid.shape, dtype=bool)
