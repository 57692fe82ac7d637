"""
Symbol-level types for layered media: covectors on the doubled (up/down) space, broken rays,
sparse amplitude vectors and per-slowness scattering blocks.

Depth z increases downward and Θ = {z > boundary}. Horizontal slowness p is conserved, so every
computation runs at one fixed p and covectors are keyed by (z, mode, layer) only.
"""

from dataclasses import dataclass, field, replace
from enum import StrEnum
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union

Number = Union[int, float, Fraction]
Scalar = Union[int, float, Fraction, complex]

INF = float("inf")


def exact_key(value: Number) -> Number:
    """Hashable position key: exact for rationals, rounded to 12 digits for floats."""
    if isinstance(value, (int, Fraction)):
        return value
    return round(float(value), 12)


def magnitude_squared(a: Scalar) -> Number:
    if isinstance(a, complex):
        return a.real**2 + a.imag**2
    return a * a


def is_zero(a: Scalar, tol: float = 0.0) -> bool:
    if isinstance(a, (int, Fraction)):
        return a == 0
    return abs(a) <= tol


class Mode(StrEnum):
    UP = "up"
    DOWN = "down"

    @property
    def sign(self) -> int:
        return 1 if self is Mode.DOWN else -1

    @property
    def flipped(self) -> "Mode":
        return Mode.UP if self is Mode.DOWN else Mode.DOWN


@dataclass(frozen=True)
class LayeredModel:
    """
    Flat layers: speeds[i] holds between interfaces[i-1] and interfaces[i] (depth axis pointing down).

    Attributes:
        interfaces (tuple): Interface depths, strictly increasing.
        speeds (tuple): Layer speeds, one more than interfaces.
        boundary (Number): Depth of ∂Θ.
        boundary_prime (Number): Depth of ∂Θ′ (≥ boundary_dprime).
        boundary_dprime (Number): Depth of ∂Θ″ (≥ boundary).
        glancing_deg (float): Angular cutoff around interface tangency.
        convention (str): "energy" for flux-normalized amplitudes, "pressure" for boundary amplitudes.
    """

    interfaces: tuple[Number, ...]
    speeds: tuple[Number, ...]
    boundary: Number = 0
    boundary_prime: Number | None = None
    boundary_dprime: Number | None = None
    glancing_deg: float = 2.0
    convention: str = "energy"

    def __post_init__(self) -> None:
        if len(self.speeds) != len(self.interfaces) + 1:
            raise ValueError("A layered model needs exactly one more speed than interfaces")
        if any(not c > 0 for c in self.speeds):
            raise ValueError("Layer speeds must be positive")
        if any(b <= a for a, b in zip(self.interfaces, self.interfaces[1:])):
            raise ValueError("Interfaces must be strictly increasing")
        if self.convention not in ("energy", "pressure"):
            raise ValueError(f"Unknown amplitude convention {self.convention!r}")
        if self.boundary_dprime is None:
            object.__setattr__(self, "boundary_dprime", self.boundary)
        if self.boundary_prime is None:
            object.__setattr__(self, "boundary_prime", self.boundary_dprime)
        if not self.boundary <= self.boundary_dprime <= self.boundary_prime:  # type: ignore[operator]
            raise ValueError("Boundaries must satisfy Θ ⊇ Θ″ ⊇ Θ′ (boundary ≤ dprime ≤ prime)")

    @property
    def n_layers(self) -> int:
        return len(self.speeds)

    def top(self, layer: int) -> Number:
        return self.interfaces[layer - 1] if layer > 0 else -INF

    def bottom(self, layer: int) -> Number:
        return self.interfaces[layer] if layer < len(self.interfaces) else INF

    def layer_of(self, z: Number) -> int:
        """
        Raises:
            ValueError: If z lies on an interface.
        """
        if z in self.interfaces:
            raise ValueError(f"Depth {z} lies on an interface")
        return sum(1 for zi in self.interfaces if zi < z)


@dataclass(frozen=True)
class Covector:
    """
    Point of the doubled cotangent space at fixed horizontal slowness p.
    The vertical slowness is fixed by |ξ| = 1/c (unit temporal frequency).
    """

    z: Number
    mode: Mode
    layer: int
    p: Number = 0
    t: Number = 0
    x: Number = 0

    def key(self) -> tuple[Number, str, int]:
        return (exact_key(self.z), self.mode.value, self.layer)

    def flipped(self) -> "Covector":
        return replace(self, mode=self.mode.flipped)

    def at(self, z: Number, t: Number, x: Number | None = None) -> "Covector":
        return replace(self, z=z, t=t, x=self.x if x is None else x)


@dataclass(frozen=True)
class Segment:
    start: Covector
    end: Covector

    @property
    def duration(self) -> Number:
        return self.end.t - self.start.t


@dataclass(frozen=True)
class RayEvent:
    kind: str
    interface: int
    time: Number
    outgoing: Mode
    amplitude: Scalar


@dataclass(frozen=True)
class BrokenRay:
    """
    A broken bicharacteristic: segments joined by reflections (R) and transmissions (T) under Snell's law.
    """

    segments: tuple[Segment, ...]
    events: tuple[RayEvent, ...]
    amplitude: Scalar
    alive: bool = True
    termination: str = "window"

    @property
    def path(self) -> str:
        return "".join(e.kind for e in self.events)


@dataclass(frozen=True)
class RayFan:
    rays: tuple[BrokenRay, ...]
    truncated_mass: float = 0.0
    glancing_mass: float = 0.0

    @property
    def alive_mass(self) -> float:
        return float(sum(float(magnitude_squared(r.amplitude)) for r in self.rays if r.alive))


@dataclass(frozen=True)
class RTCoefficients:
    """
    Reflection/transmission at a flat interface for one slowness.

    Attributes:
        r, t: Boundary (pressure) amplitudes, t = 1 + r.
        r_energy, t_energy: Flux-normalized amplitudes, r_E² + t_E² = 1 when both sides propagate.
        q_in, q_out: Vertical slownesses (q_out imaginary when evanescent).
        evanescent (bool): Total internal reflection; t marked evanescent and t_E = 0.
    """

    r: Scalar
    t: Scalar
    r_energy: Scalar
    t_energy: Scalar
    q_in: Number
    q_out: Scalar
    evanescent: bool = False


@dataclass(frozen=True)
class ScatteringBlock:
    """
    2×2 block of one interface: [out above UP, out below DOWN] = matrix · [in above DOWN, in below UP].
    A side that is evanescent at this slowness carries no propagating wave and its column/row is zero.
    """

    interface: int
    matrix: tuple[tuple[Scalar, Scalar], tuple[Scalar, Scalar]]
    propagating_above: bool
    propagating_below: bool


@dataclass(frozen=True)
class LayeredScatteringMatrix:
    p: Number
    blocks: tuple[ScatteringBlock, ...]


@dataclass(frozen=True)
class SymbolEntry:
    covector: Covector
    amplitude: Scalar
    path: str = ""
    events: int = 0


def _merge(a: SymbolEntry, b: SymbolEntry, sign: int = 1) -> SymbolEntry:
    return SymbolEntry(
        covector=a.covector,
        amplitude=a.amplitude + sign * b.amplitude,
        path=min(a.path, b.path),
        events=max(a.events, b.events),
    )


@dataclass(frozen=True)
class SymbolVector:
    """
    Finitely supported amplitude vector on the covectors of one slowness at one time.
    """

    p: Number
    t: Number
    entries: Mapping[tuple[Number, str, int], SymbolEntry] = field(default_factory=dict)

    @classmethod
    def from_entries(cls, p: Number, t: Number, entries: Iterable[SymbolEntry]) -> "SymbolVector":
        out: dict[tuple[Number, str, int], SymbolEntry] = {}
        for entry in entries:
            key = entry.covector.key()
            out[key] = _merge(out[key], entry) if key in out else entry
        return cls(p, t, out)

    def _compatible(self, other: "SymbolVector") -> None:
        if exact_key(self.p) != exact_key(other.p) or exact_key(self.t) != exact_key(other.t):
            raise ValueError("Symbol vectors must share slowness and time")

    def __add__(self, other: "SymbolVector") -> "SymbolVector":
        self._compatible(other)
        out = dict(self.entries)
        for key, entry in other.entries.items():
            out[key] = _merge(out[key], entry) if key in out else entry
        return SymbolVector(self.p, self.t, out)

    def __sub__(self, other: "SymbolVector") -> "SymbolVector":
        return self + other.scaled(-1)

    def scaled(self, factor: Scalar) -> "SymbolVector":
        return self.map(lambda e: factor)

    def map(self, weight: Callable[[SymbolEntry], Scalar]) -> "SymbolVector":
        """Pointwise multiplication by weight(entry); zero-weighted entries are dropped."""
        out = {}
        for key, entry in self.entries.items():
            w = weight(entry)
            if is_zero(w):
                continue
            out[key] = replace(entry, amplitude=w * entry.amplitude)
        return SymbolVector(self.p, self.t, out)

    def restrict(self, predicate: Callable[[SymbolEntry], bool]) -> "SymbolVector":
        return SymbolVector(self.p, self.t, {k: e for k, e in self.entries.items() if predicate(e)})

    def pruned(self, tol: float = 0.0) -> "SymbolVector":
        return self.restrict(lambda e: not is_zero(e.amplitude, tol))

    def with_time(self, t: Number) -> "SymbolVector":
        out = {k: replace(e, covector=replace(e.covector, t=t)) for k, e in self.entries.items()}
        return SymbolVector(self.p, t, out)

    def norm_squared(self) -> Number:
        return sum((magnitude_squared(e.amplitude) for e in self.entries.values()), 0)

    def norm(self) -> float:
        return float(self.norm_squared()) ** 0.5

    @property
    def support_size(self) -> int:
        return sum(1 for e in self.entries.values() if not is_zero(e.amplitude))

    def amplitude_at(self, key: tuple[Number, str, int]) -> Scalar:
        entry = self.entries.get(key)
        return entry.amplitude if entry is not None else 0


@dataclass(frozen=True)
class EscapeCertificate:
    """
    Witness of (±)-escapability: the base case "escaped" or a recursion node at an event.

    Attributes:
        direction (str): "+" or "-".
        kind (str): "escaped", "all-connecting" (case ii) or "opposite" (case iii).
        covector (Covector): Reference state on the certified segment.
        event_time (Number | None): Time of the event the recursion passes through.
        children (tuple): Certificates of the segments the recursion relies on.
    """

    direction: str
    kind: str
    covector: Covector
    event_time: Number | None = None
    children: tuple["EscapeCertificate", ...] = ()

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)


@dataclass(frozen=True)
class EscapeClassification:
    plus: EscapeCertificate | None
    minus: EscapeCertificate | None
    returning: bool
    unclassified: bool = False


@dataclass
class SymbolIteration:
    """
    Iterates n_k of the symbol Neumann series with their diagnostics.

    Attributes:
        iterates (list[SymbolVector]): n₀ = h₀, n₁, ….
        norms (list[float]): ‖n_k‖.
        inside_norms (list[float]): ‖r̃n_k‖ restricted to Θ′.
        residuals (list[float]): ‖r̃n_k − r̃(h₀ + tail)‖ restricted to Θ′, when a tail is given.
        truncated (float): ℓ² mass lost to event budgets.
    """

    iterates: list[SymbolVector] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)
    inside_norms: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    truncated: float = 0.0
