"""
(±)-escapability of broken-ray segments and the constructive tail that cancels every returning
branch of h₀ at symbol level.

A segment is (+)-escapable when the wave it carries can be routed out of Θ by time 2T using only
events that either send everything outward or can be balanced by a wave fed in from outside;
(−)-escapable is the same statement backwards in time down to t = 0.
"""

from dataclasses import dataclass, field, replace
from logging import getLogger

from models.rays import (
    BrokenRay,
    Covector,
    EscapeCertificate,
    EscapeClassification,
    LayeredModel,
    Mode,
    Number,
    Scalar,
    SymbolEntry,
    SymbolVector,
    exact_key,
    is_zero,
    magnitude_squared,
)
from pipeline.ray_tracing import (
    ABOVE,
    BELOW,
    cotangent_depth,
    input_slot,
    input_state,
    interface_block,
    next_event,
    output_state,
    position_at,
    previous_event,
    propagate_symbol,
)
from pipeline.symbol_calculus import mdt_symbol

logger = getLogger("sclab")

MAX_RECURSION = 64


def output_slot(mode: Mode) -> int:
    """Slot of a wave leaving an interface: upgoing above or downgoing below."""
    return ABOVE if mode is Mode.UP else BELOW


def _propagating(block, slot: int) -> bool:
    return block.propagating_above if slot == ABOVE else block.propagating_below


def is_returning(model: LayeredModel, cov: Covector, T: Number, start: Number, end: Number, max_events: int = 8) -> bool:
    """
    Whether the segment through cov, alive on [start, end], crosses into the forward domain of Θ′
    within [0, T]: f(t) = d*_{Θ′}(η(t)) − t is positive at a = max(start, 0) and nonpositive at
    b = min(end, T).
    """
    a = max(start, 0)
    b = min(end, T)
    if not a < b:
        return False

    def f(t: Number) -> Number:
        eta = replace(cov, z=position_at(model, cov, t), t=t)
        return cotangent_depth(model, eta, model.boundary_prime, max_events) - t

    return f(a) > 0 and f(b) <= 0


def in_forward_domain(model: LayeredModel, cov: Covector, T: Number, max_events: int = 8) -> bool:
    """D⁺ membership of a covector at time cov.t: d*_{Θ′} > 2T − t."""
    return cotangent_depth(model, cov, model.boundary_prime, max_events) - (2 * T - cov.t) > 0


@dataclass
class EscapabilityClassifier:
    """
    Memoized (±)-escapability on one layered model and control time.

    Attributes:
        model (LayeredModel): Layered medium with ∂Θ at model.boundary.
        T (Number): Control time; (+) runs to 2T and (−) back to 0.
        max_events (int): Budget for the depth searches of returning tests.
        unclassified (bool): Set when a recursion hit a cycle or the recursion budget.
    """

    model: LayeredModel
    T: Number
    max_events: int = 8
    unclassified: bool = False
    _memo: dict = field(default_factory=dict, repr=False)
    _active: set = field(default_factory=set, repr=False)

    def _key(self, direction: str, cov: Covector) -> tuple:
        return direction, cov.key(), exact_key(cov.t)

    def _guard(self, direction: str, cov: Covector, compute) -> EscapeCertificate | None:
        key = self._key(direction, cov)
        if key in self._memo:
            return self._memo[key]
        if key in self._active or len(self._active) >= MAX_RECURSION:
            self.unclassified = True
            return None
        self._active.add(key)
        try:
            result = compute(cov)
        finally:
            self._active.discard(key)
        self._memo[key] = result
        return result

    def plus(self, cov: Covector) -> EscapeCertificate | None:
        """(+)-certificate of the segment through cov, or None."""
        return self._guard("+", cov, self._plus)

    def minus(self, cov: Covector) -> EscapeCertificate | None:
        """(−)-certificate of the segment through cov, or None."""
        return self._guard("-", cov, self._minus)

    def _plus(self, cov: Covector) -> EscapeCertificate | None:
        horizon = 2 * self.T
        event = next_event(self.model, cov)
        if event is None or event[1] >= horizon:
            if position_at(self.model, cov, horizon) <= self.model.boundary:
                return EscapeCertificate("+", "escaped", cov)
            return None
        i, t_event = event
        block = interface_block(self.model, i, cov.p)
        g = input_slot(cov.mode)
        outputs = [
            output_state(self.model, i, o, cov, t_event) for o in (ABOVE, BELOW) if not is_zero(block.matrix[o][g])
        ]
        certs = [self.plus(out) for out in outputs]
        if all(c is not None for c in certs):
            return EscapeCertificate("+", "all-connecting", cov, t_event, tuple(certs))  # type: ignore[arg-type]
        opposite_in = 1 - g
        if not _propagating(block, opposite_in):
            return None
        for out, cert in zip(outputs, certs):
            if cert is None:
                continue
            other = 1 - output_slot(out.mode)
            if is_zero(block.matrix[other][opposite_in]):
                continue
            feed = self.minus(input_state(self.model, i, opposite_in, cov, t_event))
            if feed is not None:
                return EscapeCertificate("+", "opposite", cov, t_event, (cert, feed))
        return None

    def _minus(self, cov: Covector) -> EscapeCertificate | None:
        event = previous_event(self.model, cov)
        if event is None or event[1] <= 0:
            if position_at(self.model, cov, 0) <= self.model.boundary:
                return EscapeCertificate("-", "escaped", cov)
            return None
        j, t_event = event
        block = interface_block(self.model, j, cov.p)
        o = output_slot(cov.mode)
        inputs = [
            input_state(self.model, j, g, cov, t_event)
            for g in (ABOVE, BELOW)
            if _propagating(block, g) and not is_zero(block.matrix[o][g])
        ]
        certs = [self.minus(inp) for inp in inputs]
        if inputs and all(c is not None for c in certs):
            return EscapeCertificate("-", "all-connecting", cov, t_event, tuple(certs))  # type: ignore[arg-type]
        opposite_out = 1 - o
        if not _propagating(block, opposite_out):
            return None
        for cert in certs:
            if cert is None:
                continue
            drain = self.plus(output_state(self.model, j, opposite_out, cov, t_event))
            if drain is not None:
                return EscapeCertificate("-", "opposite", cov, t_event, (cert, drain))
        return None

    def classify(self, cov: Covector) -> EscapeClassification:
        """Both certificates of the segment through cov plus its returning status."""
        start = previous_event(self.model, cov)
        end = next_event(self.model, cov)
        returning = is_returning(
            self.model,
            cov,
            self.T,
            start[1] if start is not None else -float("inf"),
            end[1] if end is not None else float("inf"),
            self.max_events,
        )
        self.unclassified = False
        plus = self.plus(cov)
        minus = self.minus(cov)
        return EscapeClassification(plus, minus, returning, self.unclassified)


def classify_escapable(
    model: LayeredModel, target: Covector | BrokenRay, T: Number, max_events: int = 8
) -> EscapeClassification | list[EscapeClassification]:
    """
    Classifies a segment, or every segment of a broken ray.

    Raises:
        ValueError: If T is not positive.
    """
    if not T > 0:
        raise ValueError(f"Control time must be positive, got {T}")
    classifier = EscapabilityClassifier(model, T, max_events)
    if isinstance(target, BrokenRay):
        return [classifier.classify(segment.start) for segment in target.segments]
    return classifier.classify(target)


@dataclass
class TailReport:
    """
    Outcome of the constructive tail.

    Attributes:
        tail (SymbolVector): Amplitudes at t = 0 supported outside Θ.
        returning (int): Returning segments met while walking h₀.
        cancellations (int): Cancel steps performed.
        creations (int): Create steps performed.
    """

    tail: SymbolVector
    returning: int = 0
    cancellations: int = 0
    creations: int = 0


class _TailBuilder:
    def __init__(self, model: LayeredModel, T: Number, p: Number, max_events: int) -> None:
        self.model = model
        self.T = T
        self.p = p
        self.max_events = max_events
        self.classifier = EscapabilityClassifier(model, T, max_events)
        self.entries: list[SymbolEntry] = []
        self.report_counts = {"returning": 0, "cancellations": 0, "creations": 0}

    def _fail(self, direction: str, cov: Covector) -> ValueError:
        logger.error(f"No ({direction})-escapability certificate for {cov}")
        return ValueError(
            f"Segment at z={cov.z}, t={cov.t} ({cov.mode.value}, layer {cov.layer}) is not "
            f"({direction})-escapable; no constructive tail exists"
        )

    def cancel(self, cov: Covector, amplitude: Scalar, depth: int = 0) -> None:
        """Adds sources so that the wave of this amplitude on cov leaves Θ by 2T."""
        if is_zero(amplitude):
            return
        if depth > MAX_RECURSION:
            raise ValueError(f"Tail recursion exceeded {MAX_RECURSION} levels at {cov}")
        cert = self.classifier.plus(cov)
        if cert is None:
            raise self._fail("+", cov)
        self.report_counts["cancellations"] += 1
        if cert.kind == "escaped":
            return
        i, t_event = next_event(self.model, cov)  # type: ignore[misc]
        block = interface_block(self.model, i, self.p)
        g = input_slot(cov.mode)
        if cert.kind == "all-connecting":
            for child in cert.children:
                o = output_slot(child.covector.mode)
                self.cancel(child.covector, block.matrix[o][g] * amplitude, depth + 1)
            return
        escaping, feed = cert.children
        e = output_slot(escaping.covector.mode)
        b = 1 - e
        beta = -block.matrix[b][g] * amplitude / block.matrix[b][1 - g]
        self.create(feed.covector, beta, depth + 1)
        self.cancel(escaping.covector, block.matrix[e][g] * amplitude + block.matrix[e][1 - g] * beta, depth + 1)

    def create(self, cov: Covector, amplitude: Scalar, depth: int = 0) -> None:
        """Adds sources at t = 0 outside Θ producing exactly this amplitude on cov."""
        if is_zero(amplitude):
            return
        if depth > MAX_RECURSION:
            raise ValueError(f"Tail recursion exceeded {MAX_RECURSION} levels at {cov}")
        cert = self.classifier.minus(cov)
        if cert is None:
            raise self._fail("-", cov)
        self.report_counts["creations"] += 1
        if cert.kind == "escaped":
            start = replace(cov, z=position_at(self.model, cov, 0), t=0)
            self.entries.append(SymbolEntry(start, amplitude, "tail"))
            return
        j, t_event = previous_event(self.model, cov)  # type: ignore[misc]
        block = interface_block(self.model, j, self.p)
        o = output_slot(cov.mode)
        if cert.kind == "all-connecting":
            inputs = [c.covector for c in cert.children]
            if len(inputs) == 1:
                x = amplitude / block.matrix[o][input_slot(inputs[0].mode)]
                self.create(inputs[0], x, depth + 1)
                byproduct = block.matrix[1 - o][input_slot(inputs[0].mode)] * x
                if not is_zero(byproduct):
                    other = output_state(self.model, j, 1 - o, cov, t_event)
                    self.cancel(other, byproduct, depth + 1)
                return
            s = block.matrix
            det = s[0][0] * s[1][1] - s[0][1] * s[1][0]
            if is_zero(det):
                raise ValueError(f"Singular block at interface {j}; cannot create {cov}")
            rhs = [0, 0]
            rhs[o] = amplitude
            x_above = (rhs[0] * s[1][1] - s[0][1] * rhs[1]) / det
            x_below = (s[0][0] * rhs[1] - s[1][0] * rhs[0]) / det
            for inp in inputs:
                self.create(inp, x_above if input_slot(inp.mode) == ABOVE else x_below, depth + 1)
            return
        feed, drain = cert.children
        e = input_slot(feed.covector.mode)
        x = amplitude / block.matrix[o][e]
        self.create(feed.covector, x, depth + 1)
        byproduct = block.matrix[1 - o][e] * x
        self.cancel(drain.covector, byproduct, depth + 1)


def constructive_tail(h0: SymbolVector, model: LayeredModel, T: Number, max_events: int = 8) -> TailReport:
    """
    Builds a tail outside Θ at t = 0 such that h₀ + tail has no returning energy.

    Every branch of h₀ is followed through its events in [0, T]; the first returning segment on a
    branch is cancelled by the (+)-certificate of that segment, and the sources the cancellation
    needs are created backwards through (−)-certificates.

    Raises:
        ValueError: If h₀ is not at t = 0, or a returning segment is not (+)-escapable.
    """
    if h0.t != 0:
        raise ValueError(f"Initial symbol must sit at t = 0, got t = {h0.t}")
    builder = _TailBuilder(model, T, h0.p, max_events)
    stack: list[tuple[Covector, Scalar, int]] = [(e.covector, e.amplitude, 0) for e in h0.entries.values()]
    while stack:
        cov, amplitude, events = stack.pop()
        if is_zero(amplitude):
            continue
        event = next_event(model, cov)
        end = event[1] if event is not None else float("inf")
        if is_returning(model, cov, T, cov.t, end, max_events):
            builder.report_counts["returning"] += 1
            logger.debug(f"Returning segment at z={cov.z}, t={cov.t}; cancelling amplitude {amplitude}")
            builder.cancel(cov, amplitude)
            continue
        if event is None or not end < T or events >= max_events:
            continue
        i, t_event = event
        block = interface_block(model, i, h0.p)
        g = input_slot(cov.mode)
        for o in (ABOVE, BELOW):
            coefficient = block.matrix[o][g]
            if not is_zero(coefficient):
                stack.append((output_state(model, i, o, cov, t_event), coefficient * amplitude, events + 1))
    tail = SymbolVector.from_entries(h0.p, 0, builder.entries).pruned()
    logger.info(
        f"Constructive tail: {builder.report_counts['returning']} returning segments, "
        f"support {tail.support_size}"
    )
    return TailReport(tail, **builder.report_counts)


def mdt_residual(
    h0: SymbolVector, tail: SymbolVector, model: LayeredModel, T: Number, max_events: int = 8
) -> float:
    """
    Forward check of a tail: ℓ² mass of F(T)(h₀ + tail) − MDT(h₀) that reaches the forward domain
    D⁺ during (T, 2T]. Zero when the tail cancels every returning branch.
    """
    total = h0 + tail
    at_T, lost = propagate_symbol(total, model, T, max_events)
    difference = (at_T - mdt_symbol(h0, model, T, max_events)).pruned()
    residual = 0.0

    def on_segment(entry: SymbolEntry, start: Covector, end: Covector) -> None:
        nonlocal residual
        if in_forward_domain(model, end, T, max_events):
            residual += float(magnitude_squared(entry.amplitude))

    _, lost_late = propagate_symbol(difference, model, T, max_events, on_segment)
    if lost or lost_late:
        logger.warning(f"Forward check lost mass {lost + lost_late:.3e} to the event budget")
    return residual
