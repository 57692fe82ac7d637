"""
One-dimensional focusing: Cauchy-data tail equations for pressure and velocity, the boundary
(Rose) iteration driven by a deconvolved reflection response, their equivalence, and the
power-iteration estimate of ‖π*Rπ*R‖.
"""

from logging import getLogger

import numpy as np
from scipy.signal import find_peaks

from models.fields import CauchyData, Medium
from models.traces import (
    Arrival,
    BoundaryTrace,
    IterationTrace,
    NormEstimate,
    ReflectionKernel,
    TailPair,
    TailTrace,
)
from pipeline.projections import Projector
from pipeline.pulses import PULSE_CUTOFF, directed_pulse, gaussian_probe, random_field_data
from pipeline.scattering_control import never_entering_projector
from pipeline.wave_solver import Propagator

logger = getLogger("sclab")

PROBE_OFFSET = PULSE_CUTOFF + 1.0
BOUNDARY_CROSSING_TOLERANCE = 1e-3


def free_propagator(propagator: Propagator) -> Propagator:
    """Propagator of c ≡ 1 on the same grid with the same time step."""
    return Propagator(Medium.constant(propagator.grid, 1.0), propagator.T, propagator.cfl, dt=propagator.dt)


def boundary_node(propagator: Propagator, boundary: float = 0.0) -> int:
    """Position of the boundary point in the interior-node vector."""
    grid = propagator.grid
    if grid.dim != 1:
        raise ValueError("Boundary traces are one-dimensional")
    flat = grid.nearest_index([boundary])[0]
    where = np.flatnonzero(propagator.interior == flat)
    if not where.size:
        raise ValueError(f"Boundary point {boundary} is not an interior node")
    return int(where[0])


def record_trace(propagator: Propagator, h: CauchyData, duration: float, node: int) -> np.ndarray:
    """u(t, x_node) at every step of R_t h for t from 0 to duration (backward when negative)."""
    return np.array([u[node] for _, u, _ in propagator.stream(h, duration)])


def _check_speed_outside(propagator: Propagator, boundary: float) -> None:
    x = propagator.grid.coordinates()[0]
    c = propagator.medium.c.values
    if not np.allclose(c[x < boundary], 1.0):
        raise ValueError("The reflection response needs c ≡ 1 outside the boundary point")


def reflection_response(
    propagator: Propagator,
    probe_width: float,
    signal_width: float,
    regularization: float = 1e-6,
    condition_threshold: float = 1e3,
    boundary: float = 0.0,
) -> ReflectionKernel:
    """
    Estimates the reflection response at the boundary point by probing and deconvolving.

    A Gaussian probe is launched towards the medium from outside; the boundary trace of the full
    medium minus that of c ≡ 1 is the reflected signal, and the kernel is the regularized
    spectral quotient (water level λ = regularization · max|In|²).

    Args:
        propagator (Propagator): Propagator of the 1D medium (c ≡ 1 left of the boundary).
        probe_width (float): Probe width in time.
        signal_width (float): Width of the signals the kernel will be applied to; sets the band edge 3/(2π·width).
        regularization (float): Relative water level.
        condition_threshold (float): Largest admissible max|In|²/|In(f_edge)|².
        boundary (float): Boundary point.

    Returns:
        ReflectionKernel: Taps on the solver time grid.

    Raises:
        ValueError: If the medium is not 1D with c ≡ 1 outside, or the deconvolution is ill-conditioned.
    """
    _check_speed_outside(propagator, boundary)
    free = free_propagator(propagator)
    node = boundary_node(propagator, boundary)
    offset = PROBE_OFFSET * probe_width
    probe = gaussian_probe(free.medium, boundary - offset, probe_width)
    duration = 2 * propagator.T + 2 * offset
    incoming = record_trace(free, probe, duration, node)
    outgoing = record_trace(propagator, probe, duration, node) - incoming

    dt = propagator.dt
    nfft = 1 << int(np.ceil(np.log2(2 * len(incoming))))
    spectrum_in = np.fft.rfft(incoming, nfft)
    spectrum_out = np.fft.rfft(outgoing, nfft)
    power = np.abs(spectrum_in) ** 2
    freqs = np.fft.rfftfreq(nfft, dt)
    edge = int(np.argmin(np.abs(freqs - 3.0 / (2.0 * np.pi * signal_width))))
    condition = float(power.max() / max(power[edge], 1e-300))
    if condition > condition_threshold:
        logger.error(f"Deconvolution ill-conditioned: {condition:.3e} > {condition_threshold:.3e}")
        raise ValueError(
            f"Reflection deconvolution ill-conditioned at the signal band edge: "
            f"condition {condition:.3e} exceeds {condition_threshold:.3e} (probe too wide?)"
        )
    quotient = spectrum_out * np.conj(spectrum_in) / (power + regularization * power.max())
    raw = np.fft.irfft(quotient, nfft)
    lag0 = int(np.ceil(offset / dt))
    taps = np.concatenate((raw[nfft - lag0 :], raw[: len(incoming)]))
    logger.info(f"Reflection response: {len(taps)} taps, condition {condition:.3g}")
    return ReflectionKernel(taps, dt, lag0, probe_width, condition)


def window_times(propagator: Propagator) -> np.ndarray:
    """Sample times s = n·dt on [−T, 2T]."""
    n = propagator.steps_per_T
    return np.arange(-n, 2 * n + 1) * propagator.dt


def incoming_trace(r0: CauchyData, propagator: Propagator, boundary: float = 0.0) -> BoundaryTrace:
    """
    Boundary trace of r₀ continued backward in time through c ≡ 1: the signal that would
    have to enter at the boundary point to produce r₀ at t = 0.
    """
    free = free_propagator(propagator)
    node = boundary_node(free, boundary)
    times = window_times(propagator)
    values = np.zeros_like(times)
    n = propagator.steps_per_T
    backward = record_trace(free, r0, -propagator.T, node)
    values[: n + 1] = backward[::-1]
    return BoundaryTrace(times, values)


def _check_aligned(kernel: ReflectionKernel, trace: BoundaryTrace) -> None:
    if abs(kernel.dt - trace.dt) > 1e-12 * kernel.dt:
        raise ValueError(f"Kernel step {kernel.dt} and trace step {trace.dt} are misaligned")


def rose_operator(kernel: ReflectionKernel, trace: BoundaryTrace, T: float) -> BoundaryTrace:
    """𝓡b(s) = 𝟙_{0<s≤2T}(ℛ*b)(2T − s)."""
    _check_aligned(kernel, trace)
    response = kernel.apply(trace.values)
    n0 = int(round(-trace.times[0] / trace.dt))
    n2T = int(round(2 * T / trace.dt))
    out = np.zeros_like(trace.values)
    n = np.arange(len(trace.times)) - n0
    window = (n > 0) & (n <= n2T)
    source = (n2T - n[window]) + n0
    valid = (source >= 0) & (source < len(response))
    target = np.flatnonzero(window)[valid]
    out[target] = response[source[valid]]
    return BoundaryTrace(trace.times, out)


def rose_tail_iterate(
    kernel: ReflectionKernel, incoming: BoundaryTrace, T: float, k_max: int
) -> tuple[BoundaryTrace, list[float]]:
    """
    Truncated Neumann series K = Σ_{j=1}^{k_max} (−𝓡)^j b_in of the Rose equation.

    Returns:
        tuple: The tail and the norms of the terms.
    """
    term = incoming
    total = np.zeros_like(incoming.values)
    norms = []
    for _ in range(k_max):
        mapped = rose_operator(kernel, term, T)
        term = BoundaryTrace(mapped.times, -mapped.values)
        total += term.values
        norms.append(term.norm())
    logger.info(f"Rose tail after {k_max} terms: norm {np.sqrt(np.sum(total**2) * incoming.dt):.6g}")
    return BoundaryTrace(incoming.times, total), norms


def cauchy_to_boundary(tail: CauchyData, propagator: Propagator, boundary: float = 0.0) -> BoundaryTrace:
    """J_CB: the boundary trace over (0, 2T] of the tail propagated through c ≡ 1."""
    free = free_propagator(propagator)
    node = boundary_node(free, boundary)
    times = window_times(propagator)
    values = np.zeros_like(times)
    n = propagator.steps_per_T
    forward = record_trace(free, tail, 2 * propagator.T, node)
    values[n + 1 :] = forward[1:]
    return BoundaryTrace(times, values)


def rose_cauchy_equivalence_check(pair: TailPair, propagator: Propagator, boundary: float = 0.0) -> float:
    """
    ‖J_CB K_tail − K_rose‖ / ‖K_rose‖.

    Raises:
        ValueError: If the Rose tail is not sampled on the solver's window.
    """
    mapped = cauchy_to_boundary(pair.k_tail, propagator, boundary)
    if mapped.times.shape != pair.k_rose.times.shape or not np.allclose(
        mapped.times, pair.k_rose.times, atol=1e-9 * propagator.dt
    ):
        raise ValueError("Rose tail sampling is misaligned with the solver time grid")
    diff = float(np.linalg.norm(mapped.values - pair.k_rose.values))
    scale = float(np.linalg.norm(pair.k_rose.values))
    if scale == 0:
        return diff
    return diff / scale


def boundary_crossing(r0: CauchyData, propagator: Propagator, boundary: float = 0.0) -> float:
    """
    Largest relative value of Rr₀ at the boundary point, over both Cauchy components.

    The boundary iteration cuts arrivals sharply at time 2T while π* extends them affinely, so the
    two tails only agree when no arrival sits on the boundary point at that time.
    """
    flat = propagator.interior[boundary_node(propagator, boundary)]
    reflected = propagator.reflect(r0)
    worst = 0.0
    for values in (reflected.u0.values, reflected.u1.values):
        peak = float(np.max(np.abs(values)))
        if peak > 0:
            worst = max(worst, abs(float(values.ravel()[flat])) / peak)
    return worst


def ensure_clear_boundary(
    r0: CauchyData, propagator: Propagator, boundary: float = 0.0, tol: float = BOUNDARY_CROSSING_TOLERANCE
) -> float:
    """
    Raises:
        ValueError: If an arrival of Rr₀ crosses the boundary point at time 2T.
    """
    crossing = boundary_crossing(r0, propagator, boundary)
    if crossing > tol:
        raise ValueError(
            f"An arrival of Rr₀ crosses the boundary point at time 2T (relative value {crossing:.3g} > {tol:g}); "
            "move the interfaces or change T"
        )
    return crossing


def affine_interpolant(u: np.ndarray, anchors: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Piecewise-affine interpolation of u through the anchor nodes; the 1D harmonic extension."""
    return np.interp(x, x[anchors], u[anchors])


def _edge_energy(w: np.ndarray, spacing: float) -> float:
    return float(np.sum(np.diff(w) ** 2) / spacing)


def tail_residuals(r0: CauchyData, tail: CauchyData, projector: Projector, kind: str) -> dict[str, float]:
    """
    Focusing residuals of u(T) = R_T(r₀ + K), relative to ‖r₀‖.

    Pressure tails: the H¹ distance of u(T)'s pressure to its affine interpolant on Θ*_T.
    Velocity tails: √KE of u(T) on Θ*_T. Both: √E_{Θ_T}(R_T K), the mismatch with R_T r₀ on Θ_T.
    """
    propagator = projector.propagator
    grid = propagator.grid
    T = propagator.T
    scale = propagator.norm(r0)
    focused = propagator.propagate(r0 + tail, T)
    inside = projector.mask(T)
    residuals = {"match": float(np.sqrt(max(propagator.energy(propagator.propagate(tail, T), inside), 0.0)))}
    if kind == "pressure":
        u = focused.u0.values
        anchors = np.flatnonzero(inside | grid.boundary_mask())
        x = grid.coordinates()[0]
        residuals["harmonicity"] = float(np.sqrt(_edge_energy(u - affine_interpolant(u, anchors, x), grid.spacing)))
    else:
        residuals["velocity"] = float(np.sqrt(max(propagator.kinetic_energy(focused, ~inside), 0.0)))
    if scale > 0:
        residuals = {k: v / scale for k, v in residuals.items()}
    return residuals


def _tail_series(r0: CauchyData, projector: Projector, k_max: int, sign: float, kind: str) -> TailTrace:
    if projector.propagator.grid.dim != 1:
        raise ValueError("Tail iterations are one-dimensional")
    propagator = projector.propagator
    term = r0
    partial = r0
    partial_sums = [r0]
    norms = [propagator.norm(r0)]
    for j in range(1, k_max + 1):
        term = projector.project_outside(propagator.reflect(term)) * sign
        partial = partial + term
        partial_sums.append(partial)
        norms.append(propagator.norm(term))
    tail = partial - r0
    trace = TailTrace(r0, tail, partial_sums, norms, kind=kind)
    trace.residuals = tail_residuals(r0, tail, projector, kind)
    logger.info(f"{kind.capitalize()} tail after {k_max} terms: residuals {trace.residuals}")
    return trace


def pressure_tail_iterate(r0: CauchyData, projector: Projector, k_max: int) -> TailTrace:
    """K = Σ_{j≥1}(−π*R)^j r₀, solving K + π*RK = −π*Rr₀; u(T) is harmonic outside Θ_T."""
    return _tail_series(r0, projector, k_max, -1.0, "pressure")


def velocity_tail_iterate(r0: CauchyData, projector: Projector, k_max: int) -> TailTrace:
    """K = Σ_{j≥1}(π*R)^j r₀, solving K − π*RK = π*Rr₀; ∂ₜu(T) vanishes outside Θ_T."""
    return _tail_series(r0, projector, k_max, 1.0, "velocity")


def even_term_identity_residual(
    pressure: TailTrace, velocity: TailTrace, control: IterationTrace, projector: Projector
) -> float:
    """max over k of ‖(P_{2k} + V_{2k})/2 − h_k‖ / ‖h₀‖ where both partial sums and h_k are available."""
    propagator = projector.propagator
    scale = propagator.norm(control.h0) or 1.0
    worst = 0.0
    for k, h in control.iterates.items():
        if 2 * k >= min(len(pressure.partial_sums), len(velocity.partial_sums)):
            continue
        even = (pressure.partial_sums[2 * k] + velocity.partial_sums[2 * k]) * 0.5
        worst = max(worst, propagator.norm(even - h) / scale)
    return worst


def marchenko_pair(
    r0: CauchyData,
    projector: Projector,
    kernel: ReflectionKernel,
    k_max: int,
    boundary: float = 0.0,
    pressure: TailTrace | None = None,
) -> TailPair:
    """Cauchy and Rose tails of the same r₀."""
    propagator = projector.propagator
    pressure = pressure or pressure_tail_iterate(r0, projector, k_max)
    incoming = incoming_trace(r0, propagator, boundary)
    k_rose, _ = rose_tail_iterate(kernel, incoming, propagator.T, k_max)
    return TailPair(pressure.tail, k_rose, {"incoming": incoming, "k_max": k_max})


def _center(template: BoundaryTrace) -> float:
    weight = template.values**2
    return float(np.sum(template.times * weight) / np.sum(weight))


def arrival_amplitude(
    trace: BoundaryTrace, template: BoundaryTrace, time: float, reversed: bool, half_window: float
) -> float:
    """Least-squares amplitude of the (possibly time-reversed) template centred at `time`."""
    center = _center(template)
    offset = trace.times - time
    tau = center - offset if reversed else center + offset
    shape = np.interp(tau, template.times, template.values, left=0.0, right=0.0)
    window = np.abs(offset) <= half_window
    energy = float(np.sum(shape[window] ** 2))
    if energy == 0:
        raise ValueError(f"Template has no energy in the window around t={time}")
    return float(np.sum(trace.values[window] * shape[window]) / energy)


def detect_arrivals(
    trace: BoundaryTrace, template: BoundaryTrace, half_window: float, threshold: float = 0.05
) -> list[Arrival]:
    """
    Matched-filter arrival picking: peaks of |trace ⋆ template| above threshold·max, with
    amplitudes against the forward template.
    """
    center = _center(template)
    lags = np.arange(-len(template.values) + 1, len(trace.values))
    correlation = np.correlate(trace.values, template.values, mode="full") / np.sum(template.values**2)
    envelope = np.abs(correlation)
    if not envelope.max() > 0:
        return []
    peaks, _ = find_peaks(envelope, height=threshold * envelope.max(), distance=max(1, int(half_window / trace.dt)))
    arrivals = []
    for p in peaks:
        time = trace.times[0] + lags[p] * trace.dt + (center - template.times[0])
        arrivals.append(Arrival(float(time), arrival_amplitude(trace, template, time, False, half_window), False))
    return arrivals


def operator_norm_estimate(
    projector: Projector,
    subspace: str,
    rng: np.random.Generator,
    iterations: int = 30,
    tol: float = 1e-6,
    pulses: int = 3,
    width: float = 0.02,
    custom: CauchyData | None = None,
) -> NormEstimate:
    """
    Power iteration for the top of the spectrum of B = Q(π*Rπ*)²Q, Q removing data that never enters Θ.

    Args:
        projector (Projector): Projections of the medium.
        subspace (str): "rightward" (reflections of random rightward 1D pulses), "full" (smoothed noise on
            the 2T-band outside Θ) or "custom".
        rng (np.random.Generator): Seeded generator.
        iterations (int): Iteration budget.
        tol (float): Relative change of the Rayleigh quotient counted as converged.
        pulses (int): Number of random pulses for the rightward subspace.
        width (float): Pulse width for the rightward subspace.
        custom (CauchyData | None): Starting data for the custom subspace.

    Returns:
        NormEstimate: Final Rayleigh quotient and its history.
    """
    propagator = projector.propagator
    T = propagator.T

    def outward(x: CauchyData) -> CauchyData:
        return projector.project_outside(propagator.reflect(projector.project_outside(x)))

    if subspace == "rightward":
        if propagator.grid.dim != 1:
            raise ValueError("The rightward subspace is one-dimensional")
        d = projector.depth.values
        x = propagator.grid.coordinates()[0]
        candidates = x[(d >= PULSE_CUTOFF * width * 1.2) & (d <= T)]
        if not candidates.size:
            raise ValueError("No room inside Θ for rightward probe pulses")
        seed_data = CauchyData.zeros(propagator.grid)
        for center in rng.choice(candidates, size=pulses):
            seed_data = seed_data + directed_pulse(propagator.medium, float(center), width) * float(rng.uniform(0.5, 1.5))
        start = projector.project_outside(propagator.reflect(seed_data))
    elif subspace == "full":
        d = projector.depth.values
        start = random_field_data(propagator.grid, rng, (d < 0) & (d > -2 * T))
    elif subspace == "custom":
        if custom is None:
            raise ValueError("The custom subspace needs starting data")
        start = custom
    else:
        raise ValueError(f"Unknown subspace {subspace!r}")

    vector = never_entering_projector(start, projector)
    norm = propagator.norm(vector)
    if norm <= 1e-12 * max(propagator.norm(start), 1e-300):
        logger.info(f"Operator norm estimate ({subspace}): start vector vanishes, estimate 0")
        return NormEstimate(0.0, [0.0], subspace, True)
    vector = vector * (1.0 / norm)
    history: list[float] = []
    converged = False
    for i in range(iterations):
        image = never_entering_projector(outward(outward(vector)), projector)
        quotient = propagator.inner(vector, image)
        history.append(quotient)
        logger.info(f"Power iteration {i}: {quotient:.6g}")
        if len(history) > 1 and abs(history[-1] - history[-2]) <= tol * max(abs(quotient), 1e-30):
            converged = True
            break
        size = propagator.norm(image)
        if size == 0:
            converged = True
            break
        vector = image * (1.0 / size)
    return NormEstimate(history[-1], history, subspace, converged)
