"""
Broken rays in flat layered media at a fixed horizontal slowness p.

Interfaces couple the downgoing wave above and the upgoing wave below into the upgoing wave
above and the downgoing wave below through a 2×2 block per interface. Positions and times stay
exact for Fraction inputs at p = 0 in the pressure convention.
"""

import heapq
import itertools
from dataclasses import replace
from fractions import Fraction
from functools import lru_cache
from logging import getLogger
from typing import Callable

import numpy as np

from models.rays import (
    INF,
    BrokenRay,
    Covector,
    LayeredModel,
    LayeredScatteringMatrix,
    Mode,
    Number,
    RayEvent,
    RayFan,
    RTCoefficients,
    Scalar,
    ScatteringBlock,
    Segment,
    SymbolEntry,
    SymbolVector,
    is_zero,
    magnitude_squared,
)

logger = getLogger("sclab")

# Input/output slots of an interface block.
ABOVE, BELOW = 0, 1


def _exact(value: Number) -> bool:
    return isinstance(value, (int, Fraction))


def reciprocal(value: Number) -> Number:
    return Fraction(1) / value if _exact(value) else 1.0 / value


def vertical_slowness(c: Number, p: Number) -> Number | None:
    """q = √(c⁻² − p²); exactly 1/c at p = 0; None when the layer is evanescent."""
    if p == 0:
        return reciprocal(c)
    value = 1.0 / float(c) ** 2 - float(p) ** 2
    return float(np.sqrt(value)) if value > 0 else None


def vertical_speed(c: Number, p: Number) -> Number | None:
    """dz/dt = c²q of a propagating wave, None when evanescent."""
    q = vertical_slowness(c, p)
    return None if q is None else c * c * q


def _check_glancing(c: Number, p: Number, glancing_deg: float) -> None:
    cos2 = 1.0 - (float(p) * float(c)) ** 2
    if abs(cos2) < np.sin(np.deg2rad(glancing_deg)) ** 2:
        raise ValueError(
            f"Slowness p={p} is within {glancing_deg}° of glancing in a layer of speed {c}"
        )


def rt_coefficients(
    c_in: Number, c_out: Number, p: Number = 0, glancing_deg: float = 2.0
) -> RTCoefficients:
    """
    Reflection and transmission of a plane wave at a flat interface.

    Boundary amplitudes r = (q₁ − q₂)/(q₁ + q₂), t = 1 + r; flux-normalized t_E = t√(q₂/q₁)
    so that r² + t_E² = 1. Beyond the critical slowness q₂ is imaginary, r is unimodular and t_E = 0.

    Args:
        c_in (Number): Speed on the incident side.
        c_out (Number): Speed on the far side.
        p (Number): Horizontal slowness.
        glancing_deg (float): Angular cutoff around tangency.

    Returns:
        RTCoefficients: Both normalizations.

    Raises:
        ValueError: For non-positive speeds, an evanescent incident side, or glancing incidence.
    """
    if not (c_in > 0 and c_out > 0):
        raise ValueError(f"Speeds must be positive, got {c_in}, {c_out}")
    _check_glancing(c_in, p, glancing_deg)
    _check_glancing(c_out, p, glancing_deg)
    q_in = vertical_slowness(c_in, p)
    if q_in is None:
        raise ValueError(f"No propagating incident wave at p={p} in speed {c_in}")
    q_out = vertical_slowness(c_out, p)
    if q_out is None:
        q_imag = 1j * float(np.sqrt(float(p) ** 2 - 1.0 / float(c_out) ** 2))
        r = (q_in - q_imag) / (q_in + q_imag)
        return RTCoefficients(r, 1 + r, r, 0, q_in, q_imag, evanescent=True)
    r = (q_in - q_out) / (q_in + q_out)
    t = 2 * q_in / (q_in + q_out)
    if q_in == q_out:
        t_energy: Scalar = t
    else:
        t_energy = t * float(np.sqrt(float(q_out) / float(q_in)))
    return RTCoefficients(r, t, r, t_energy, q_in, q_out)


def direct_crossings(model: LayeredModel, z: Number, T: Number) -> list[tuple[Number, Number]]:
    """
    Time and energy transmission t²·q_out/q_in of every interface the direct downgoing arrival
    from depth z reaches within T, at normal incidence. Exact for Fraction inputs.
    """
    crossings: list[tuple[Number, Number]] = []
    layer = model.layer_of(z)
    elapsed: Number = 0
    while layer < len(model.interfaces):
        elapsed += (model.interfaces[layer] - z) / model.speeds[layer]
        if elapsed > T:
            break
        rc = rt_coefficients(model.speeds[layer], model.speeds[layer + 1])
        crossings.append((elapsed, magnitude_squared(rc.t) * rc.q_out / rc.q_in))  # type: ignore[operator]
        z = model.interfaces[layer]
        layer += 1
    return crossings


def direct_transmission(model: LayeredModel, z: Number, T: Number) -> Number:
    """Energy fraction the direct arrival from depth z still carries at time T."""
    fraction: Number = 1
    for _, transmitted in direct_crossings(model, z, T):
        fraction *= transmitted
    return fraction


@lru_cache(maxsize=None)
def interface_block(model: LayeredModel, i: int, p: Number) -> ScatteringBlock:
    """
    Block of interface i: [out above UP, out below DOWN] = S · [in above DOWN, in below UP].
    """
    above, below = model.speeds[i], model.speeds[i + 1]
    up_ok = vertical_slowness(above, p) is not None
    down_ok = vertical_slowness(below, p) is not None
    zero: Scalar = 0
    s = [[zero, zero], [zero, zero]]
    pressure = model.convention == "pressure"
    if up_ok:
        from_above = rt_coefficients(above, below, p, model.glancing_deg)
        s[ABOVE][ABOVE] = from_above.r if pressure else from_above.r_energy
        s[BELOW][ABOVE] = (from_above.t if pressure else from_above.t_energy) if down_ok else zero
    if down_ok:
        from_below = rt_coefficients(below, above, p, model.glancing_deg)
        s[BELOW][BELOW] = from_below.r if pressure else from_below.r_energy
        s[ABOVE][BELOW] = (from_below.t if pressure else from_below.t_energy) if up_ok else zero
    return ScatteringBlock(i, ((s[0][0], s[0][1]), (s[1][0], s[1][1])), up_ok, down_ok)


def scattering_matrix(model: LayeredModel, p: Number = 0) -> LayeredScatteringMatrix:
    return LayeredScatteringMatrix(p, tuple(interface_block(model, i, p) for i in range(len(model.interfaces))))


def input_slot(mode: Mode) -> int:
    """Slot of a wave arriving at an interface: downgoing from above or upgoing from below."""
    return ABOVE if mode is Mode.DOWN else BELOW


def output_state(model: LayeredModel, interface: int, slot: int, cov: Covector, t: Number) -> Covector:
    """Covector leaving interface through an output slot."""
    z = model.interfaces[interface]
    if slot == ABOVE:
        return replace(cov, z=z, mode=Mode.UP, layer=interface, t=t)
    return replace(cov, z=z, mode=Mode.DOWN, layer=interface + 1, t=t)


def input_state(model: LayeredModel, interface: int, slot: int, cov: Covector, t: Number) -> Covector:
    """Covector arriving at interface through an input slot."""
    z = model.interfaces[interface]
    if slot == ABOVE:
        return replace(cov, z=z, mode=Mode.DOWN, layer=interface, t=t)
    return replace(cov, z=z, mode=Mode.UP, layer=interface + 1, t=t)


def speed_of(model: LayeredModel, cov: Covector) -> Number:
    v = vertical_speed(model.speeds[cov.layer], cov.p)
    if v is None:
        raise ValueError(f"Covector {cov} sits in a layer that is evanescent at p={cov.p}")
    return v


def position_at(model: LayeredModel, cov: Covector, t: Number) -> Number:
    """Depth of the segment through cov at time t (no events assumed)."""
    return cov.z + cov.mode.sign * speed_of(model, cov) * (t - cov.t)


def next_event(model: LayeredModel, cov: Covector) -> tuple[int, Number] | None:
    """(interface, time) ending the segment through cov, None if it never ends."""
    if cov.mode is Mode.DOWN:
        if cov.layer >= len(model.interfaces):
            return None
        i = cov.layer
        return i, cov.t + (model.interfaces[i] - cov.z) / speed_of(model, cov)
    if cov.layer == 0:
        return None
    i = cov.layer - 1
    return i, cov.t + (cov.z - model.interfaces[i]) / speed_of(model, cov)


def previous_event(model: LayeredModel, cov: Covector) -> tuple[int, Number] | None:
    """(interface, time) starting the segment through cov, None if it has no start."""
    if cov.mode is Mode.DOWN:
        if cov.layer == 0:
            return None
        i = cov.layer - 1
        return i, cov.t - (cov.z - model.interfaces[i]) / speed_of(model, cov)
    if cov.layer >= len(model.interfaces):
        return None
    i = cov.layer
    return i, cov.t - (model.interfaces[i] - cov.z) / speed_of(model, cov)


def make_covector(model: LayeredModel, z: Number, mode: Mode | str, p: Number = 0, t: Number = 0) -> Covector:
    """
    Raises:
        ValueError: If z is on an interface or the layer is evanescent at p.
    """
    cov = Covector(z, Mode(mode), model.layer_of(z), p, t)
    speed_of(model, cov)
    return cov


def trace_rays(
    model: LayeredModel, eta: Covector, duration: Number, max_events: int = 6
) -> RayFan:
    """
    All broken rays through eta over [eta.t, eta.t + duration] with at most max_events events.

    Amplitudes are cumulative products of the block entries (energy or pressure convention).
    Rays needing more events inside the window are cut and their mass reported as truncated.

    Raises:
        ValueError: If eta is on an interface or glancing.
    """
    speed_of(model, eta)
    t_end = eta.t + duration
    rays: list[BrokenRay] = []
    truncated = 0.0
    glancing = 0.0

    stack: list[tuple[Covector, Scalar, tuple[Segment, ...], tuple[RayEvent, ...]]] = [(eta, 1, (), ())]
    while stack:
        cov, amp, segments, events = stack.pop()
        event = next_event(model, cov)
        if event is None or event[1] >= t_end:
            end = replace(cov, z=position_at(model, cov, t_end), t=t_end)
            rays.append(BrokenRay(segments + (Segment(cov, end),), events, amp))
            continue
        i, t_event = event
        arrival = input_state(model, i, input_slot(cov.mode), cov, t_event)
        segment = Segment(cov, arrival)
        if len(events) >= max_events:
            truncated += float(magnitude_squared(amp))
            rays.append(BrokenRay(segments + (segment,), events, amp, alive=False, termination="budget"))
            continue
        try:
            block = interface_block(model, i, cov.p)
        except ValueError:
            glancing += float(magnitude_squared(amp))
            rays.append(BrokenRay(segments + (segment,), events, amp, alive=False, termination="glancing"))
            continue
        g = input_slot(cov.mode)
        for slot in (BELOW, ABOVE):
            coefficient = block.matrix[slot][g]
            if is_zero(coefficient):
                continue
            kind = "R" if slot == g else "T"
            out = output_state(model, i, slot, cov, t_event)
            new_amp = amp * coefficient
            stack.append(
                (out, new_amp, segments + (segment,), events + (RayEvent(kind, i, t_event, out.mode, new_amp),))
            )
    if truncated:
        logger.warning(f"Ray budget of {max_events} events truncated mass {truncated:.3e}")
    return RayFan(tuple(rays), truncated, glancing)


def cotangent_depth(
    model: LayeredModel,
    eta: Covector,
    boundary: Number | None = None,
    max_events: int = 8,
    horizon: Number = INF,
) -> Number:
    """
    Signed broken-ray travel time from eta to the depth `boundary` (∂Θ by default).

    Both time directions and every reflection/transmission branch are searched in time order;
    the sign is + for covectors inside Θ (z > boundary). Unreachable within the budget or
    horizon gives ±inf.
    """
    b = model.boundary if boundary is None else boundary
    sign = 1 if eta.z > b else -1
    if eta.z == b:
        return 0
    counter = itertools.count()
    heap: list[tuple[Number, int, int, Covector | None]] = []
    for start in (eta, eta.flipped()):
        heapq.heappush(heap, (0, next(counter), 0, replace(start, t=0)))
    while heap:
        elapsed, _, events, cov = heapq.heappop(heap)
        if cov is None:
            return sign * elapsed
        if elapsed > horizon:
            break
        v = speed_of(model, cov)
        event = next_event(model, cov)
        end_z = INF if cov.mode is Mode.DOWN else -INF
        if event is not None:
            end_z = model.interfaces[event[0]]
        lo, hi = (cov.z, end_z) if cov.mode is Mode.DOWN else (end_z, cov.z)
        if lo <= b <= hi:
            heapq.heappush(heap, (elapsed + abs(b - cov.z) / v, next(counter), events, None))
            continue
        if event is None or events >= max_events:
            continue
        i, t_event = event
        block = interface_block(model, i, cov.p)
        g = input_slot(cov.mode)
        for slot in (ABOVE, BELOW):
            if is_zero(block.matrix[slot][g]):
                continue
            out = output_state(model, i, slot, cov, t_event)
            heapq.heappush(heap, (t_event, next(counter), events + 1, out))
    return sign * INF


def depth_profile(
    model: LayeredModel, ray: BrokenRay, boundary: Number | None = None, samples: int = 200, max_events: int = 8
) -> list[tuple[float, float]]:
    """(t, d*(η(t))) along a broken ray, for depth diagrams."""
    start = ray.segments[0].start.t
    end = ray.segments[-1].end.t
    out = []
    for t in np.linspace(float(start), float(end), samples):
        for segment in ray.segments:
            if segment.start.t <= t <= segment.end.t:
                cov = segment.start
                z = position_at(model, cov, float(t))
                if z in model.interfaces:
                    break
                depth = cotangent_depth(model, replace(cov, z=z, t=t), boundary, max_events)
                out.append((float(t), float(depth)))
                break
    return out


SegmentCallback = Callable[[SymbolEntry, Covector, Covector], None]


def propagate_symbol(
    vector: SymbolVector,
    model: LayeredModel,
    duration: Number,
    max_events: int = 8,
    on_segment: SegmentCallback | None = None,
) -> tuple[SymbolVector, float]:
    """
    Propagates an amplitude vector forward by `duration`, merging coherently at events.

    All entries share one clock. At each event time the waves arriving at an interface from
    above and below are combined through its block, so simultaneous arrivals interfere;
    equal covectors are then summed and exact zeros dropped.

    Args:
        vector (SymbolVector): Entries at time vector.t.
        model (LayeredModel): Layered medium.
        duration (Number): Nonnegative propagation time.
        max_events (int): Per-entry event budget; entries exceeding it are dropped.
        on_segment (Callable | None): Called with (entry, start, end) for every travelled piece.

    Returns:
        tuple: The propagated vector at vector.t + duration and the truncated ℓ² mass.
    """
    if duration < 0:
        raise ValueError(f"Symbol propagation runs forward only, got duration {duration}")
    t = vector.t
    t_end = t + duration
    active = dict(vector.entries)
    truncated = 0.0
    while True:
        upcoming = {key: next_event(model, e.covector) for key, e in active.items()}
        times = [ev[1] for ev in upcoming.values() if ev is not None and ev[1] < t_end]
        t_next = min(times) if times else t_end

        moved: dict[tuple, SymbolEntry] = {}
        arrivals: dict[int, dict[int, SymbolEntry]] = {}
        for key, entry in active.items():
            cov = entry.covector
            ev = upcoming[key]
            if ev is not None and ev[1] == t_next and t_next < t_end:
                i, _ = ev
                end = input_state(model, i, input_slot(cov.mode), cov, t_next)
                if on_segment is not None:
                    on_segment(entry, cov, end)
                arrivals.setdefault(i, {})[input_slot(cov.mode)] = replace(entry, covector=end)
                continue
            end = replace(cov, z=position_at(model, cov, t_next), t=t_next)
            if on_segment is not None and t_next > cov.t:
                on_segment(entry, cov, end)
            moved[end.key()] = replace(entry, covector=end)

        if t_next >= t_end and not arrivals:
            return SymbolVector(vector.p, t_end, moved), truncated

        outputs: list[SymbolEntry] = []
        for i, slots in arrivals.items():
            block = interface_block(model, i, vector.p)
            events = max(e.events for e in slots.values()) + 1
            path = min(e.path for e in slots.values())
            if events > max_events:
                truncated += float(sum(magnitude_squared(e.amplitude) for e in slots.values()))
                continue
            for out_slot in (ABOVE, BELOW):
                amp: Scalar = 0
                for g, e in slots.items():
                    amp = amp + block.matrix[out_slot][g] * e.amplitude
                if is_zero(amp):
                    continue
                reference = next(iter(slots.values())).covector
                out = output_state(model, i, out_slot, reference, t_next)
                kind = "M" if len(slots) > 1 else ("R" if out_slot in slots else "T")
                outputs.append(SymbolEntry(out, amp, path + kind, events))
        merged = SymbolVector.from_entries(vector.p, t_next, list(moved.values()) + outputs).pruned()
        active = dict(merged.entries)
        t = t_next
        if not active:
            return SymbolVector(vector.p, t_end, {}), truncated


def symbol_from_covectors(p: Number, entries: list[tuple[Covector, Scalar]], t: Number = 0) -> SymbolVector:
    return SymbolVector.from_entries(p, t, [SymbolEntry(replace(c, t=t), a) for c, a in entries])


def time_reverse_symbol(vector: SymbolVector) -> SymbolVector:
    """ν at symbol level: flip every mode and conjugate amplitudes."""

    def conj(a: Scalar) -> Scalar:
        return a.conjugate() if isinstance(a, complex) else a

    return SymbolVector.from_entries(
        vector.p,
        vector.t,
        [replace(e, covector=e.covector.flipped(), amplitude=conj(e.amplitude)) for e in vector.entries.values()],
    )
