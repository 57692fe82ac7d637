"""
Symbol-level scattering control on layered media: cutoff weights, the almost direct transmission
symbol, the reflection symbol r̃ and the Neumann iteration n_{k+1} = h₀ + σ*r̃σ*r̃ n_k.
"""

from dataclasses import replace
from logging import getLogger

import numpy as np

from models.rays import (
    Covector,
    LayeredModel,
    Mode,
    Number,
    RayFan,
    Scalar,
    SymbolEntry,
    SymbolIteration,
    SymbolVector,
    exact_key,
    is_zero,
)
from pipeline.ray_tracing import (
    ABOVE,
    BELOW,
    cotangent_depth,
    input_slot,
    input_state,
    interface_block,
    make_covector,
    next_event,
    output_state,
    propagate_symbol,
    time_reverse_symbol,
)

logger = getLogger("sclab")


def sigma_star_weight(z: Number, boundary: Number, boundary_dprime: Number) -> Number:
    """
    Cutoff σ* in depth: 1 outside Θ, 0 inside Θ″, a cosine taper in between.
    With boundary_dprime == boundary it is the exact step 𝟙_{z ≤ boundary}.
    """
    if z <= boundary:
        return 1
    if z >= boundary_dprime:
        return 0
    s = float(z - boundary) / float(boundary_dprime - boundary)
    return 0.5 * (1.0 + float(np.cos(np.pi * s)))


def mdt_weight(depth_prime: Number, depth_dprime: Number, T: Number) -> Number:
    """
    Smooth cutoff of the almost direct transmission: 1 when d*_{Θ′} > T, 0 when d*_{Θ″} ≤ T,
    a cosine taper in the travel-time gap between.
    """
    if depth_prime > T:
        return 1
    if depth_dprime <= T:
        return 0
    gap = float(depth_dprime - depth_prime)
    s = float(np.clip((float(depth_dprime) - float(T)) / gap, 0.0, 1.0)) if gap > 0 else 1.0
    return 0.5 * (1.0 - float(np.cos(np.pi * s)))


def apply_sigma_star(vector: SymbolVector, model: LayeredModel) -> SymbolVector:
    return vector.map(lambda e: sigma_star_weight(e.covector.z, model.boundary, model.boundary_dprime))


def mdt_symbol(h0: SymbolVector, model: LayeredModel, T: Number, max_events: int = 8) -> SymbolVector:
    """
    Symbol of the almost direct transmission at time T: h₀ propagated by T with every covector
    weighted by its travel-time distance to ∂Θ′ and ∂Θ″.
    """
    at_T, truncated = propagate_symbol(h0, model, T, max_events)
    if truncated:
        logger.warning(f"Direct transmission lost mass {truncated:.3e} to the event budget")

    def weight(entry: SymbolEntry) -> Number:
        cov = entry.covector
        d_prime = cotangent_depth(model, cov, model.boundary_prime, max_events)
        d_dprime = cotangent_depth(model, cov, model.boundary_dprime, max_events)
        return mdt_weight(d_prime, d_dprime, T)

    return at_T.map(weight)


def r_tilde(vector: SymbolVector, model: LayeredModel, T: Number, max_events: int = 8) -> tuple[SymbolVector, float]:
    """
    r̃ = ν∘F(2T): propagate by 2T, reverse time and reset the clock to the input time.

    Returns:
        tuple: r̃v and the truncated ℓ² mass.
    """
    propagated, truncated = propagate_symbol(vector, model, 2 * T, max_events)
    return time_reverse_symbol(propagated).with_time(vector.t), truncated


def _inside_prime(vector: SymbolVector, model: LayeredModel) -> SymbolVector:
    return vector.restrict(lambda e: e.covector.z > model.boundary_prime)


def symbol_neumann_iterate(
    h0: SymbolVector,
    model: LayeredModel,
    T: Number,
    k_max: int,
    max_events: int = 8,
    tail: SymbolVector | None = None,
    prune_tol: float = 0.0,
) -> SymbolIteration:
    """
    Neumann series n_{k+1} = h₀ + σ*r̃σ*r̃ n_k on amplitude vectors.

    Args:
        h0 (SymbolVector): Initial symbol at t = 0.
        model (LayeredModel): Layered medium with its boundaries.
        T (Number): Control time.
        k_max (int): Number of iterations.
        max_events (int): Event budget of every propagation.
        tail (SymbolVector | None): Constructive tail; when given, residuals against r̃(h₀ + tail) are recorded.
        prune_tol (float): Drops entries of magnitude at most prune_tol between iterations.

    Returns:
        SymbolIteration: Iterates with norms, inside-Θ′ terminal norms and residuals.
    """
    trace = SymbolIteration()
    reference = None
    if tail is not None:
        reference, lost = r_tilde(h0 + tail, model, T, max_events)
        trace.truncated += lost

    n = h0
    for k in range(k_max + 1):
        forward, lost = r_tilde(n, model, T, max_events)
        trace.truncated += lost
        trace.iterates.append(n)
        trace.norms.append(n.norm())
        trace.inside_norms.append(_inside_prime(forward, model).norm())
        if reference is not None:
            trace.residuals.append(_inside_prime(forward - reference, model).norm())
        logger.debug(f"Symbol iterate {k}: support {n.support_size}, norm {trace.norms[-1]:.6g}")
        if k == k_max:
            break
        step = apply_sigma_star(forward, model)
        step, lost = r_tilde(step, model, T, max_events)
        trace.truncated += lost
        n = (h0 + apply_sigma_star(step, model)).pruned(prune_tol)
    if trace.truncated:
        logger.warning(f"Symbol iteration lost mass {trace.truncated:.3e} to the event budget")
    return trace


SeriesKey = tuple[int, str, Number]


def layered_scattering_series(
    model: LayeredModel, source: Covector, duration: Number, k_max: int
) -> tuple[dict[SeriesKey, Scalar], bool]:
    """
    Scattering series summed over event counts 0..k_max: coherent arrivals at each interface
    pass through its block once per application.

    Returns:
        tuple: Output amplitudes keyed by (interface, outgoing mode, time) and whether arrivals
        beyond k_max were still inside the window.
    """
    t_end = source.t + duration
    series: dict[SeriesKey, Scalar] = {}
    current: list[tuple[Covector, Scalar]] = [(source, 1)]
    for _ in range(k_max):
        arrivals: dict[tuple[int, Number], dict[int, tuple[Covector, Scalar]]] = {}
        for cov, amp in current:
            event = next_event(model, cov)
            if event is None or event[1] >= t_end:
                continue
            i, t_event = event
            slot = input_slot(cov.mode)
            key = (i, exact_key(t_event))
            previous = arrivals.setdefault(key, {}).get(slot)
            total = amp if previous is None else previous[1] + amp
            arrivals[key][slot] = (input_state(model, i, slot, cov, t_event), total)
        current = []
        for (i, t_key), slots in arrivals.items():
            block = interface_block(model, i, source.p)
            reference = next(iter(slots.values()))[0]
            for out_slot in (ABOVE, BELOW):
                amp: Scalar = 0
                for g, (_, a) in slots.items():
                    amp = amp + block.matrix[out_slot][g] * a
                if is_zero(amp):
                    continue
                out = output_state(model, i, out_slot, reference, reference.t)
                key3 = (i, out.mode.value, t_key)
                series[key3] = series.get(key3, 0) + amp
                current.append((out, amp))
        if not current:
            return series, False
    beyond = any(
        (ev := next_event(model, cov)) is not None and ev[1] < t_end for cov, _ in current
    )
    return series, beyond


def ray_path_sums(fan: RayFan) -> dict[SeriesKey, Scalar]:
    """
    Sums cumulative event amplitudes of a ray fan over distinct path prefixes, keyed like
    layered_scattering_series.
    """
    prefixes: dict[tuple, tuple[SeriesKey, Scalar]] = {}
    for ray in fan.rays:
        for j, event in enumerate(ray.events):
            prefix = tuple((e.interface, e.kind, exact_key(e.time)) for e in ray.events[: j + 1])
            prefixes[prefix] = ((event.interface, event.outgoing.value, exact_key(event.time)), event.amplitude)
    sums: dict[SeriesKey, Scalar] = {}
    for key, amp in prefixes.values():
        sums[key] = sums.get(key, 0) + amp
    return sums


def random_symbol_vector(
    model: LayeredModel, rng: np.random.Generator, size: int, p: Number = 0, t: Number = 0
) -> SymbolVector:
    """Random real amplitudes on covectors at random depths inside the layered span."""
    top = model.interfaces[0] - 1.0 if model.interfaces else -1.0
    bottom = model.interfaces[-1] + 1.0 if model.interfaces else 1.0
    entries = []
    while len(entries) < size:
        z = float(rng.uniform(top, bottom))
        if z in model.interfaces:
            continue
        mode = Mode.DOWN if rng.random() < 0.5 else Mode.UP
        entries.append(SymbolEntry(make_covector(model, z, mode, p, t), float(rng.standard_normal())))
    return SymbolVector.from_entries(p, t, entries)


def double_reflection(
    vector: SymbolVector, model: LayeredModel, T: Number, max_events: int = 8
) -> tuple[SymbolVector, float]:
    """
    σ*r̃σ*r̃v, the step of the symbol Neumann iteration.

    Returns:
        tuple: The image and the truncated ℓ² mass of both propagations.
    """
    once, lost_first = r_tilde(vector, model, T, max_events)
    twice, lost_second = r_tilde(apply_sigma_star(once, model), model, T, max_events)
    return apply_sigma_star(twice, model), lost_first + lost_second


def random_symbol_norm_check(
    model: LayeredModel,
    rng: np.random.Generator,
    trials: int = 20,
    size: int = 6,
    T: Number = 1,
    p: Number = 0,
    max_events: int = 12,
) -> float:
    """
    Largest ‖σ*r̃σ*r̃v‖/‖v‖ over random vectors in the flux-normalized convention. At most 1
    since r̃ is unitary there and σ* weights lie in [0, 1].
    """
    energy_model = model if model.convention == "energy" else replace(model, convention="energy")
    worst = 0.0
    for _ in range(trials):
        v = random_symbol_vector(energy_model, rng, size, p)
        norm_in = v.norm()
        if norm_in == 0:
            continue
        out, _ = double_reflection(v, energy_model, T, max_events)
        worst = max(worst, out.norm() / norm_in)
    logger.info(f"Random ‖σ*r̃σ*r̃v‖/‖v‖ ≤ {worst:.12f} over {trials} trials")
    return worst


def flux_residual(model: LayeredModel, p: Number = 0) -> float:
    """
    max over interfaces and propagating inputs of |Σ_o |S[o][g]|² − 1| in the flux-normalized
    convention; zero for lossless blocks.
    """
    energy_model = model if model.convention == "energy" else replace(model, convention="energy")
    worst = 0.0
    for i in range(len(energy_model.interfaces)):
        block = interface_block(energy_model, i, p)
        for g, alive in ((ABOVE, block.propagating_above), (BELOW, block.propagating_below)):
            if not alive:
                continue
            flux = sum(abs(complex(block.matrix[o][g])) ** 2 for o in (ABOVE, BELOW))
            worst = max(worst, abs(flux - 1.0))
    return worst
