"""
Scattering control: the Neumann iteration h_{k+1} = h₀ + π*Rπ*R h_k, the almost direct transmission
oracle, energy and kinetic-energy recovery, wave-field recovery and the admissibility checks of the tails.
"""

from logging import getLogger
from typing import Iterable

import numpy as np

from models.fields import CauchyData
from models.traces import AdtResult, HStarReport, IterationRecord, IterationTrace, NeumannComparison
from pipeline.projections import Projector
from pipeline.wave_solver import time_reverse

logger = getLogger("sclab")

SUPPORT_TOLERANCE = 1e-6
INVARIANT_TOLERANCE = 1e-6
MONOTONE_SLACK = 1e-6
MAX_LEMMA_DIMENSION = 12


def _relative(value: float, scale: float) -> float:
    return value / scale if scale > 0 else value


def ensure_supported_inside(h0: CauchyData, projector: Projector) -> None:
    """
    Raises:
        ValueError: If h₀ is not supported in Θ (‖π*h₀‖ > 10⁻⁶‖h₀‖).
    """
    norm = projector.propagator.norm(h0)
    if norm == 0:
        return
    outside = projector.propagator.norm(projector.project_outside(h0))
    if outside > SUPPORT_TOLERANCE * norm:
        logger.error(f"Initial data leaks outside Θ: ‖π*h0‖/‖h0‖ = {outside / norm:.3e}")
        raise ValueError(
            f"Initial data must be supported in Θ: ‖π*h0‖/‖h0‖ = {outside / norm:.3e} exceeds {SUPPORT_TOLERANCE}"
        )


def almost_direct_transmission(h0: CauchyData, projector: Projector) -> AdtResult:
    """
    Oracle h_DT = π̄_T R_T h₀, computed with full knowledge of the medium.

    Args:
        h0 (CauchyData): Initial data supported in Θ.
        projector (Projector): Projections of the medium; supplies T.

    Returns:
        AdtResult: h_DT with its energy, kinetic energy and the energy of its harmonic extension.

    Raises:
        ValueError: If h₀ is not supported in Θ.
    """
    ensure_supported_inside(h0, projector)
    propagator = projector.propagator
    T = propagator.T
    mask = projector.mask(T)
    h_dt = projector.project_inside(propagator.propagate(h0, T), T)
    result = AdtResult(
        h_dt=h_dt,
        energy=propagator.inner(h_dt, h_dt),
        kinetic_energy=propagator.kinetic_energy(h_dt),
        outside_energy=propagator.energy(h_dt, ~mask),
        mask=mask,
    )
    logger.info(
        f"Almost direct transmission: E={result.energy:.6g}, KE={result.kinetic_energy:.6g}, "
        f"E outside Θ_T={result.outside_energy:.3g}"
    )
    return result


def scattering_control_iterate(
    h0: CauchyData,
    projector: Projector,
    k_max: int,
    oracle: AdtResult | bool | None = True,
    keep_every: int = 5,
    stabilization_tol: float = 1e-4,
    stabilization_window: int = 3,
    ke_cross_check: bool = False,
    snapshot_iterations: Iterable[int] = (),
) -> IterationTrace:
    """
    Runs the scattering control series and records its diagnostics.

    Each step costs two reflections: Rh_k splits into π̄Rh_k and a = π*Rh_k, and the
    next iterate is h₀ + π*Ra. The invariant π̄h_k = h₀ is asserted at every k. A fixed
    point at k = 0 stops the run; otherwise the series runs to k_max and stabilization
    (`stabilization_window` consecutive relative increments below `stabilization_tol`)
    is only recorded, never an error.

    Args:
        h0 (CauchyData): Initial data supported in Θ.
        projector (Projector): Projections of the medium.
        k_max (int): Last iterate index.
        oracle (AdtResult | bool | None): Precomputed oracle, True to compute it, False/None to skip it.
        keep_every (int): Keep every m-th iterate in the trace.
        stabilization_tol (float): Relative increment threshold.
        stabilization_window (int): Consecutive increments needed.
        ke_cross_check (bool): Also record E(π̄Rh − π̄Rπ̄Rh)/4 (one extra reflection per k).
        snapshot_iterations (Iterable[int]): Iterates always kept.

    Returns:
        IterationTrace: Records for k = 0..K and the kept iterates.

    Raises:
        ValueError: If h₀ is not supported in Θ or k_max is negative.
        RuntimeError: If the invariant π̄h_k = h₀ breaks beyond tolerance.
    """
    if k_max < 0:
        raise ValueError(f"k_max must be nonnegative, got {k_max}")
    ensure_supported_inside(h0, projector)
    propagator = projector.propagator
    T = propagator.T
    if oracle is True:
        adt: AdtResult | None = almost_direct_transmission(h0, projector)
    elif isinstance(oracle, AdtResult):
        adt = oracle
    else:
        adt = None
    h0_norm = propagator.norm(h0)
    h0_energy = h0_norm**2
    dt_norm = propagator.norm(adt.h_dt) if adt is not None else 0.0
    keep = set(snapshot_iterations)

    trace = IterationTrace(h0=h0, T=T, oracle=adt)
    h = h0
    quiet = 0
    previous_inside = np.inf
    for k in range(k_max + 1):
        drift = propagator.norm(projector.project_inside(h) - h0)
        if drift > INVARIANT_TOLERANCE * max(h0_norm, 1e-300):
            logger.error(f"Invariant π̄h_k = h0 broken at k={k}: drift {drift:.3e}")
            raise RuntimeError(f"Invariant π̄h_k = h0 broken at k={k}: ‖π̄h_k − h0‖ = {drift:.3e}")

        Rh = propagator.reflect(h)
        a = projector.project_outside(Rh)
        inside = Rh - a
        Ra = propagator.reflect(a)
        b = projector.project_outside(Ra)
        h_next = h0 + b

        h_energy = propagator.inner(h, h)
        a_energy = propagator.inner(a, a)
        b_energy = propagator.inner(b, b)
        ip_tail = propagator.inner(a, h - Ra)
        ip_source = propagator.inner(h0, Ra + Rh)
        kinetic = (h_energy + h0_energy - b_energy + 2 * ip_tail - 2 * ip_source) / 4.0

        cross_check = None
        if ke_cross_check:
            second = projector.project_inside(propagator.reflect(inside))
            diff = inside - second
            cross_check = propagator.inner(diff, diff) / 4.0

        mismatch = None
        if adt is not None:
            recovered = propagator.propagate(time_reverse(inside), -T)
            mismatch = _relative(propagator.norm(recovered - adt.h_dt), dt_norm)

        inside_norm = propagator.norm(inside)
        if inside_norm > previous_inside + MONOTONE_SLACK * h0_norm:
            logger.warning(
                f"k={k}: ‖π̄Rh_k‖ increased from {previous_inside:.9g} to {inside_norm:.9g}"
            )
        previous_inside = inside_norm
        increment = _relative(propagator.norm(h_next - h), h0_norm)

        record = IterationRecord(
            k=k,
            tail_norm=propagator.norm(h - h0),
            inside_norm=inside_norm,
            outside_norm=float(np.sqrt(max(a_energy, 0.0))),
            double_norm=float(np.sqrt(max(b_energy, 0.0))),
            h_norm=float(np.sqrt(max(h_energy, 0.0))),
            interior_mismatch=mismatch,
            recovered_energy=h_energy - a_energy,
            recovered_kinetic_energy=kinetic,
            kinetic_cross_check=cross_check,
            ip_tail=ip_tail,
            ip_source=ip_source,
            double_energy=b_energy,
            increment=increment,
        )
        trace.records.append(record)
        if k % keep_every == 0 or k in keep:
            trace.iterates[k] = h
        logger.info(
            f"k={k}: tail={record.tail_norm:.4e} inside={inside_norm:.6e} "
            f"E={record.recovered_energy:.6e} KE={kinetic:.6e} increment={increment:.3e}"
            + (f" mismatch={mismatch:.3e}" if mismatch is not None else "")
        )

        quiet = quiet + 1 if increment < stabilization_tol else 0
        if k == 0 and quiet:
            trace.stabilized_at = 0
            logger.info("Fixed point at k=0: π*Rπ*Rh0 vanishes")
            break
        if trace.stabilized_at is None and quiet >= stabilization_window:
            trace.stabilized_at = k - stabilization_window + 1
            logger.info(f"Tail stabilized at k={trace.stabilized_at}")
        if k < k_max:
            h = h_next

    trace.iterates[trace.last_k] = h
    if trace.stabilized_at is None and len(trace.records) > stabilization_window:
        tails = [r.tail_norm for r in trace.records[-stabilization_window - 1 :]]
        if all(b >= a for a, b in zip(tails, tails[1:])):
            logger.info("Tail norm still growing at k_max: the series does not stabilize")
    return trace


def recover_energy(trace: IterationTrace) -> np.ndarray:
    """E_k = E(h_k) − E(π*Rh_k) for every recorded k."""
    return np.array([r.recovered_energy for r in trace.records])


def recover_kinetic_energy(trace: IterationTrace) -> np.ndarray:
    """KE_k from the limit formula, divided by 4, for every recorded k."""
    return np.array([r.recovered_kinetic_energy for r in trace.records])


def interior_field_recovery(trace: IterationTrace, s: float, projector: Projector) -> CauchyData:
    """
    R_{−s} π̄_{T−s} R_{T+s} h_k for the last iterate; tends to h_DT for every s ∈ [0, T].

    Raises:
        ValueError: If s lies outside [0, T].
    """
    T = projector.T
    if not -1e-12 <= s <= T + 1e-12:
        raise ValueError(f"Recovery time s={s} must lie in [0, T] = [0, {T}]")
    propagator = projector.propagator
    forward = propagator.propagate(trace.final, T + s)
    return propagator.propagate(projector.project_inside(forward, T - s), -s)


def wavefield_recovery_outside(trace: IterationTrace, t: float, projector: Projector) -> CauchyData:
    """
    R_t h_k − R_{t−2T}(π*R_{2T}h_k): the wave field of h_DT at time t − T, read off without the interior speed.

    Raises:
        ValueError: If t lies outside [0, 2T].
    """
    T = projector.T
    if not -1e-12 <= t <= 2 * T + 1e-12:
        raise ValueError(f"Recovery time t={t} must lie in [0, 2T] = [0, {2 * T}]")
    propagator = projector.propagator
    h = trace.final
    outgoing = projector.project_outside(propagator.propagate(h, 2 * T))
    return propagator.propagate(h, t) - propagator.propagate(outgoing, t - 2 * T)


def wavefield_oracle(adt: AdtResult, t: float, projector: Projector) -> CauchyData:
    """R_{t−T} h_DT."""
    return projector.propagator.propagate(adt.h_dt, t - projector.T)


def diamond_data(trace: IterationTrace, projector: Projector) -> CauchyData:
    """R_{−2T}π̄R_{2T}h_k, stationary harmonic outside Θ at t = 0 and t = 2T."""
    propagator = projector.propagator
    T = propagator.T
    return propagator.propagate(projector.project_inside(propagator.propagate(trace.final, 2 * T)), -2 * T)


def hstar_membership_residuals(h: CauchyData, projector: Projector) -> HStarReport:
    """‖π̄h‖, ‖π*_{−2T}h‖ and ‖π*_{−2T}R_{2T}h‖: all vanish for admissible tails."""
    propagator = projector.propagator
    level = -2 * propagator.T
    report = HStarReport(
        inside=propagator.norm(projector.project_inside(h)),
        outside_initial=propagator.norm(projector.project_outside(h, level)),
        outside_final=propagator.norm(
            projector.project_outside(propagator.propagate(h, 2 * propagator.T), level)
        ),
    )
    logger.info(f"H* residuals: {report.asdict()}")
    return report


def factorization_residual(h: CauchyData, projector: Projector) -> float:
    """Relative ‖(I − π*Rπ*R)h − (I − π*R)(I + π*R)h‖."""
    propagator = projector.propagator

    def step(x: CauchyData) -> CauchyData:
        return projector.project_outside(propagator.reflect(x))

    once = step(h)
    lhs = h - step(once)
    plus = h + once
    rhs = plus - step(plus)
    return _relative(propagator.norm(lhs - rhs), propagator.norm(h))


def never_entering_projector(h: CauchyData, projector: Projector) -> CauchyData:
    """Q h = R_{−T}π̄_{−T}R_T h: removes data that stays outside the T-neighbourhood of Θ at time T."""
    propagator = projector.propagator
    T = propagator.T
    return propagator.propagate(projector.project_inside(propagator.propagate(h, T), -T), -T)


def minimal_norm_neumann_check(
    A: np.ndarray, x: np.ndarray, max_terms: int = 100_000, tol: float = 1e-15
) -> NeumannComparison:
    """
    Compares the series Σ A^{2k}x with the minimal-norm solution of (I − A²)y = x.

    Args:
        A (np.ndarray): Symmetric contraction of dimension at most 12.
        x (np.ndarray): Right-hand side.
        max_terms (int): Series cap.
        tol (float): Stop once a term is below tol·max(1, ‖x‖).

    Returns:
        NeumannComparison: Series value, pseudoinverse oracle and their distance.

    Raises:
        ValueError: If A is not symmetric, too large, or not a contraction.
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or x.shape != (A.shape[0],):
        raise ValueError(f"Shapes do not match: A {A.shape}, x {x.shape}")
    if A.shape[0] > MAX_LEMMA_DIMENSION:
        raise ValueError(f"Dimension {A.shape[0]} exceeds {MAX_LEMMA_DIMENSION}")
    if not np.allclose(A, A.T, atol=1e-12):
        raise ValueError("A must be symmetric")
    eigenvalues, vectors = np.linalg.eigh(A)
    if np.max(np.abs(eigenvalues), initial=0.0) > 1 + 1e-12:
        raise ValueError(f"‖A‖ = {np.max(np.abs(eigenvalues)):.6g} exceeds 1")

    gap = 1.0 - eigenvalues**2
    coefficients = vectors.T @ x
    keep = gap > 1e-12
    oracle = vectors[:, keep] @ (coefficients[keep] / gap[keep])

    A2 = A @ A
    term = x.copy()
    total = x.copy()
    terms = 1
    scale = max(1.0, float(np.linalg.norm(x)))
    while terms < max_terms and np.linalg.norm(term) > tol * scale:
        term = A2 @ term
        total += term
        terms += 1
    return NeumannComparison(total, oracle, float(np.linalg.norm(total - oracle)), terms)
