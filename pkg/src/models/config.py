"""
Validated run configuration. A YAML document merged over the packaged defaults is parsed into these models.
"""

from typing import Literal, Optional

from pydantic import BaseModel, field_validator, model_validator


class GridConfig(BaseModel):
    dim: int = 1
    spacing: float
    lower: list[float]
    upper: list[float]

    @field_validator("dim")
    @classmethod
    def validate_dim(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError(f"grid.dim must be 1 or 2, got {v}")
        return v

    @field_validator("spacing")
    @classmethod
    def validate_spacing(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("grid.spacing must be positive")
        return v

    @model_validator(mode="after")
    def validate_box(self) -> "GridConfig":
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError(f"grid.lower and grid.upper need {self.dim} coordinates")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("grid.upper must exceed grid.lower on every axis")
        return self


class LayeredConfig(BaseModel):
    interfaces: list[float] = []
    speeds: list[float]
    axis: int = -1

    @model_validator(mode="after")
    def validate_layers(self) -> "LayeredConfig":
        if len(self.speeds) != len(self.interfaces) + 1:
            raise ValueError("medium.layered needs exactly one more speed than interfaces")
        if any(c <= 0 for c in self.speeds):
            raise ValueError("medium.layered speeds must be positive")
        if any(b <= a for a, b in zip(self.interfaces, self.interfaces[1:])):
            raise ValueError("medium.layered interfaces must be strictly increasing")
        return self


class MediumConfig(BaseModel):
    """Precedence: field_file, then layered, then constant."""

    constant: Optional[float] = 1.0
    layered: Optional[LayeredConfig] = None
    field_file: Optional[str] = None

    @field_validator("constant")
    @classmethod
    def validate_constant(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not v > 0:
            raise ValueError("medium.constant must be positive")
        return v

    @model_validator(mode="after")
    def validate_source(self) -> "MediumConfig":
        if self.constant is None and self.layered is None and self.field_file is None:
            raise ValueError("medium needs one of constant, layered or field_file")
        return self


class BoxConfig(BaseModel):
    lower: list[float]
    upper: list[float]

    @model_validator(mode="after")
    def validate_corners(self) -> "BoxConfig":
        if len(self.lower) != len(self.upper):
            raise ValueError("box corners must have the same dimension")
        if any(hi < lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box upper corner must not lie below the lower corner")
        return self

    def contains(self, other: "BoxConfig") -> bool:
        return all(a <= b for a, b in zip(self.lower, other.lower)) and all(
            a >= b for a, b in zip(self.upper, other.upper)
        )


class DomainConfig(BaseModel):
    theta: BoxConfig
    theta_dprime: Optional[BoxConfig] = None
    theta_prime: Optional[BoxConfig] = None
    omega: Optional[BoxConfig] = None

    def boxes(self) -> dict[str, BoxConfig]:
        """Every domain box, missing inner domains defaulting to the next outer one."""
        out = {"theta": self.theta}
        outer = self.theta
        for name in ("theta_dprime", "theta_prime", "omega"):
            box = getattr(self, name)
            outer = box if box is not None else outer
            out[name] = outer
        return out

    @model_validator(mode="after")
    def validate_nesting(self) -> "DomainConfig":
        boxes = self.boxes()
        chain = [("omega", "Ω"), ("theta_prime", "Θ′"), ("theta_dprime", "Θ″"), ("theta", "Θ")]
        for (inner, a), (outer, b) in zip(chain, chain[1:]):
            if not boxes[outer].contains(boxes[inner]):
                raise ValueError(f"Domain nesting violated: {a} ⊆ {b}")
        return self


class SourceConfig(BaseModel):
    kind: Literal["pulse", "packet", "zero"] = "pulse"
    center: list[float] = [0.0]
    width: float = 0.05
    direction: Literal["forward", "backward", "standing"] = "forward"
    angle: float = 0.0
    period: Optional[float] = None
    amplitude: float = 1.0

    @field_validator("width")
    @classmethod
    def validate_width(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("source.width must be positive")
        return v


class SolverConfig(BaseModel):
    cfl: float = 0.8
    projection: Literal["direct", "cg"] = "cg"
    cg_rtol: float = 1e-10
    cg_maxiter: int = 20000

    @field_validator("cfl")
    @classmethod
    def validate_cfl(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError(f"solver.cfl must lie in (0, 1), got {v}")
        return v


class IterationConfig(BaseModel):
    k_max: int = 30
    keep_every: int = 5
    stabilization_tol: float = 1e-4
    stabilization_window: int = 3
    oracle: bool = True
    ke_cross_check: bool = False
    snapshot_iterations: list[int] = []

    @field_validator("k_max")
    @classmethod
    def validate_k_max(cls, v: int) -> int:
        if v < 0:
            raise ValueError("iteration.k_max must be non-negative")
        return v

    @field_validator("keep_every", "stabilization_window")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("iteration.keep_every and stabilization_window must be at least 1")
        return v


class MarchenkoConfig(BaseModel):
    probe_width: Optional[float] = None
    regularization: float = 1e-6
    condition_threshold: float = 1e3
    k_max: int = 20
    velocity: bool = True
    boundary: float = 0.0


class NormConfig(BaseModel):
    enabled: bool = False
    subspace: Literal["rightward", "full", "custom"] = "rightward"
    iterations: int = 30
    tol: float = 1e-6
    pulses: int = 3
    custom_file: Optional[str] = None

    @model_validator(mode="after")
    def validate_custom(self) -> "NormConfig":
        if self.subspace == "custom" and not self.custom_file:
            raise ValueError("norm.subspace 'custom' requires norm.custom_file")
        return self


class CovectorConfig(BaseModel):
    z: float
    mode: Literal["up", "down"]
    amplitude: float = 1.0
    x: float = 0.0


class RaysConfig(BaseModel):
    interfaces: list[float] = []
    speeds: list[float] = [1.0]
    slowness: float = 0.0
    boundary: float = 0.0
    boundary_prime: Optional[float] = None
    boundary_dprime: Optional[float] = None
    sources: list[CovectorConfig] = []
    max_events: int = 8
    glancing_deg: float = 2.0
    exact: bool = False
    convention: Literal["energy", "pressure"] = "energy"
    neumann_k_max: int = 40
    series_k_max: int = 6

    @model_validator(mode="after")
    def validate_model(self) -> "RaysConfig":
        if len(self.speeds) != len(self.interfaces) + 1:
            raise ValueError("rays needs exactly one more speed than interfaces")
        if any(c <= 0 for c in self.speeds):
            raise ValueError("rays speeds must be positive")
        dprime = self.boundary_dprime if self.boundary_dprime is not None else self.boundary
        prime = self.boundary_prime if self.boundary_prime is not None else dprime
        if not self.boundary <= dprime <= prime:
            raise ValueError("rays boundaries must satisfy boundary ≤ boundary_dprime ≤ boundary_prime")
        return self


class OutputConfig(BaseModel):
    directory: str = "outputs"
    snapshot_times: list[float] = []
    sample_every: int = 10


class CheckConfig(BaseModel):
    random_fields: int = 5
    random_symbols: int = 100
    random_matrices: int = 50


class LoggingConfig(BaseModel):
    level: str = "INFO"
    json_format: bool = False


class RunConfig(BaseModel):
    name: str = "custom"
    seed: int = 7
    T: float
    grid: GridConfig
    medium: MediumConfig = MediumConfig()
    domain: DomainConfig
    source: SourceConfig = SourceConfig()
    solver: SolverConfig = SolverConfig()
    iteration: IterationConfig = IterationConfig()
    marchenko: MarchenkoConfig = MarchenkoConfig()
    norm: NormConfig = NormConfig()
    rays: Optional[RaysConfig] = None
    output: OutputConfig = OutputConfig()
    check: CheckConfig = CheckConfig()
    logging: LoggingConfig = LoggingConfig()

    @field_validator("T")
    @classmethod
    def validate_T(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("T must be positive")
        return v

    @model_validator(mode="after")
    def validate_geometry(self) -> "RunConfig":
        dim = self.grid.dim
        upsilon = BoxConfig(lower=self.grid.lower, upper=self.grid.upper)
        for name, box in self.domain.boxes().items():
            if len(box.lower) != dim:
                raise ValueError(f"domain.{name} needs {dim} coordinates")
        theta = self.domain.theta
        if not all(a < b for a, b in zip(upsilon.lower, theta.lower)) or not all(
            a > b for a, b in zip(upsilon.upper, theta.upper)
        ):
            raise ValueError("Domain nesting violated: Θ ⊆ Υ (Θ̄ must lie strictly inside Υ)")
        if self.source.kind != "zero":
            if len(self.source.center) != dim:
                raise ValueError(f"source.center needs {dim} coordinates")
            inside = all(
                lo <= x <= hi for lo, x, hi in zip(theta.lower, self.source.center, theta.upper)
            )
            if not inside:
                raise ValueError("source.center must lie inside Θ")
        if self.medium.layered is not None and self.medium.field_file is None:
            axis = self.medium.layered.axis % dim
            lo, hi = self.grid.lower[axis], self.grid.upper[axis]
            if any(not lo < z < hi for z in self.medium.layered.interfaces):
                raise ValueError("medium.layered interfaces must lie inside Υ")
        return self
