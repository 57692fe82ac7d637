"""
Result containers of the scattering-control and Marchenko pipelines.
"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from models.fields import CauchyData


@dataclass(frozen=True)
class AdtResult:
    """
    Almost direct transmission h_DT = π̄_T R_T h₀. Oracle only: computing it requires the interior wave speed.

    Attributes:
        h_dt (CauchyData): The harmonic almost direct transmission.
        energy (float): E(h_DT), including the harmonic extension outside Θ_T.
        kinetic_energy (float): KE(h_DT) = KE_{Θ_T}(R_T h₀).
        outside_energy (float): E_{Θ*_T}(h_DT), the energy of the harmonic extension.
        mask (np.ndarray): Θ_T.
    """

    h_dt: CauchyData
    energy: float
    kinetic_energy: float
    outside_energy: float
    mask: np.ndarray


@dataclass
class IterationRecord:
    k: int
    tail_norm: float
    inside_norm: float
    outside_norm: float
    double_norm: float
    h_norm: float
    interior_mismatch: float | None
    recovered_energy: float
    recovered_kinetic_energy: float
    kinetic_cross_check: float | None
    ip_tail: float
    ip_source: float
    double_energy: float
    increment: float


@dataclass
class IterationTrace:
    """
    Partial sums h_k of the scattering control series with per-step diagnostics.
    """

    h0: CauchyData
    T: float
    records: list[IterationRecord] = field(default_factory=list)
    iterates: dict[int, CauchyData] = field(default_factory=dict)
    stabilized_at: int | None = None
    oracle: AdtResult | None = None

    @property
    def last_k(self) -> int:
        if not self.records:
            raise ValueError("Iteration trace is empty")
        return self.records[-1].k

    @property
    def final(self) -> CauchyData:
        return self.iterates[self.last_k]

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(r) for r in self.records])


@dataclass(frozen=True)
class HStarReport:
    """Residuals ‖π̄h‖, ‖π*_{−2T}h‖ and ‖π*_{−2T}R_{2T}h‖ of the H*-characterization."""

    inside: float
    outside_initial: float
    outside_final: float

    @property
    def worst(self) -> float:
        return max(self.inside, self.outside_initial, self.outside_final)

    def asdict(self) -> dict[str, float]:
        return {
            "inside": self.inside,
            "outside_initial": self.outside_initial,
            "outside_final": self.outside_final,
        }


@dataclass(frozen=True)
class DiamondReport:
    """max |∂ₜu| over the discrete diamond {d*_Θ < T − |t − T|}, per step and overall."""

    times: np.ndarray
    per_step: np.ndarray
    residual: float
    peak: float

    @property
    def relative(self) -> float:
        return self.residual / self.peak if self.peak > 0 else 0.0


@dataclass(frozen=True)
class NormEstimate:
    estimate: float
    history: list[float]
    subspace: str
    converged: bool


@dataclass(frozen=True)
class NeumannComparison:
    """Truncated series Σ A^{2k}x against the pseudoinverse solution of (I − A²)y = x."""

    series: np.ndarray
    oracle: np.ndarray
    difference: float
    terms: int


@dataclass(frozen=True)
class BoundaryTrace:
    """
    Uniformly sampled time series at the boundary point x = 0.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("Boundary trace needs one value per sample time")
        if len(self.times) > 2 and not np.allclose(np.diff(self.times), self.dt, rtol=1e-9, atol=1e-12):
            raise ValueError("Boundary trace samples must be uniformly spaced")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.dt))

    def to_frame(self, column: str = "value") -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, column: self.values})


@dataclass(frozen=True)
class ReflectionKernel:
    """
    Discrete reflection response: out(tₙ) = Σⱼ taps[j]·in(tₙ − (j − lag0)·dt).

    Attributes:
        taps (np.ndarray): Dimensionless kernel samples.
        dt (float): Sampling interval (the solver time step).
        lag0 (int): Index of the zero lag in taps.
        probe_width (float): Width of the band-limiting probe.
        condition (float): Deconvolution condition number at the band edge.
    """

    taps: np.ndarray
    dt: float
    lag0: int
    probe_width: float
    condition: float

    @property
    def lags(self) -> np.ndarray:
        return (np.arange(len(self.taps)) - self.lag0) * self.dt

    def apply(self, signal: np.ndarray) -> np.ndarray:
        full = np.convolve(signal, self.taps)
        return full[self.lag0 : self.lag0 + len(signal)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lag": self.lags, "tap": self.taps})


@dataclass
class TailTrace:
    """
    Neumann iterates of the pressure (or velocity) tail equation.

    Attributes:
        r0 (CauchyData): Focusing data the tail is built for.
        tail (CauchyData): Final tail K.
        partial_sums (list[CauchyData]): Partial sums Σ_{j≤l} xⱼ, xⱼ the signed series terms.
        term_norms (list[float]): ‖xⱼ‖.
        residuals (dict[str, float]): Harmonicity and matching residuals of u(T).
        kind (str): "pressure" or "velocity".
    """

    r0: CauchyData
    tail: CauchyData
    partial_sums: list[CauchyData]
    term_norms: list[float]
    residuals: dict[str, float] = field(default_factory=dict)
    kind: str = "pressure"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"j": np.arange(len(self.term_norms)), "term_norm": self.term_norms})


@dataclass(frozen=True)
class TailPair:
    """Cauchy-side tail and its Rose (boundary time-series) counterpart built from the same r0."""

    k_tail: CauchyData
    k_rose: BoundaryTrace
    meta: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Arrival:
    time: float
    amplitude: float
    reversed: bool
