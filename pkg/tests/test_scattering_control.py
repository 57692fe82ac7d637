"""
Unit tests for the scattering control series, its recovery formulas and the admissibility checks.
"""

import numpy as np
import pytest

from pipeline.marchenko import even_term_identity_residual, pressure_tail_iterate, velocity_tail_iterate
from pipeline.pulses import directed_pulse, random_field_data
from pipeline.scattering_control import (
    almost_direct_transmission,
    ensure_supported_inside,
    factorization_residual,
    hstar_membership_residuals,
    interior_field_recovery,
    minimal_norm_neumann_check,
    never_entering_projector,
    recover_energy,
    recover_kinetic_energy,
    scattering_control_iterate,
    wavefield_oracle,
    wavefield_recovery_outside,
)


@pytest.fixture(scope="module")
def layered_trace(layered_lab):
    return scattering_control_iterate(layered_lab.initial_data(), layered_lab.projector, 4, keep_every=1)


@pytest.fixture(scope="module")
def constant_trace(constant_lab):
    return scattering_control_iterate(constant_lab.initial_data(), constant_lab.projector, 4)


def test_free_pulse_is_a_fixed_point(constant_trace):
    """
    Test that a pulse leaving Θ for good stops the series at k = 0.
    """
    assert constant_trace.stabilized_at == 0
    assert len(constant_trace.records) == 1
    assert constant_trace.records[0].increment < 1e-6


def test_free_pulse_wavefield_recovery(constant_lab, constant_trace):
    projector = constant_lab.projector
    propagator = constant_lab.propagator
    scale = propagator.norm(constant_trace.h0)
    for t in (0.25, 0.5, 0.75):
        recovered = wavefield_recovery_outside(constant_trace, t, projector)
        expected = wavefield_oracle(constant_trace.oracle, t, projector)
        assert propagator.norm(recovered - expected) <= 1e-5 * scale


def test_layered_series_runs_to_k_max(layered_trace):
    assert [r.k for r in layered_trace.records] == [0, 1, 2, 3, 4]
    assert sorted(layered_trace.iterates) == [0, 1, 2, 3, 4]
    assert layered_trace.to_frame().shape[0] == 5
    assert len(recover_energy(layered_trace)) == 5
    assert len(recover_kinetic_energy(layered_trace)) == 5


def test_inside_norm_is_non_increasing(layered_lab, layered_trace):
    slack = 1e-6 * layered_lab.propagator.norm(layered_trace.h0)
    norms = [r.inside_norm for r in layered_trace.records]
    assert all(b <= a + slack for a, b in zip(norms, norms[1:]))


def test_invariant_inside_part_is_h0(layered_lab, layered_trace):
    projector = layered_lab.projector
    propagator = layered_lab.propagator
    for h in layered_trace.iterates.values():
        drift = propagator.norm(projector.project_inside(h) - layered_trace.h0)
        assert drift <= 1e-6 * propagator.norm(layered_trace.h0)


def test_interior_recovery_matches_recorded_mismatch(layered_lab, layered_trace):
    projector = layered_lab.projector
    propagator = layered_lab.propagator
    adt = layered_trace.oracle
    recovered = interior_field_recovery(layered_trace, projector.T, projector)
    mismatch = propagator.norm(recovered - adt.h_dt) / propagator.norm(adt.h_dt)
    assert mismatch == pytest.approx(layered_trace.records[-1].interior_mismatch, rel=1e-9, abs=1e-12)


def test_tail_has_no_inside_part(layered_lab, layered_trace):
    tail = layered_trace.final - layered_trace.h0
    report = hstar_membership_residuals(tail, layered_lab.projector)
    assert report.inside <= 1e-6 * layered_lab.propagator.norm(layered_trace.h0)
    assert report.worst >= report.inside


def test_almost_direct_transmission(layered_lab):
    adt = almost_direct_transmission(layered_lab.initial_data(), layered_lab.projector)
    assert adt.energy > 0
    assert adt.energy <= layered_lab.propagator.energy(layered_lab.initial_data()) * (1 + 1e-9)
    assert np.array_equal(adt.mask, layered_lab.projector.mask(layered_lab.propagator.T))


def test_even_terms_of_pressure_and_velocity_tails(layered_lab):
    """
    Test that averaging pressure and velocity partial sums of order 2k reproduces h_k.
    """
    h0 = layered_lab.initial_data()
    projector = layered_lab.projector
    pressure = pressure_tail_iterate(h0, projector, 6)
    velocity = velocity_tail_iterate(h0, projector, 6)
    control = scattering_control_iterate(h0, projector, 3, oracle=False, keep_every=1)
    assert even_term_identity_residual(pressure, velocity, control, projector) < 1e-10


def test_factorization(layered_lab):
    assert factorization_residual(layered_lab.initial_data(), layered_lab.projector) < 1e-10


def test_never_entering_projector_is_idempotent(constant_lab):
    propagator = constant_lab.propagator
    h = random_field_data(constant_lab.grid, np.random.default_rng(9))
    once = never_entering_projector(h, constant_lab.projector)
    twice = never_entering_projector(once, constant_lab.projector)
    assert propagator.norm(twice - once) <= 1e-9 * propagator.norm(h)


def test_initial_data_outside_theta(constant_lab):
    h0 = directed_pulse(constant_lab.medium, -0.5, 0.03)
    with pytest.raises(ValueError, match="supported in Θ"):
        ensure_supported_inside(h0, constant_lab.projector)
    with pytest.raises(ValueError, match="supported in Θ"):
        scattering_control_iterate(h0, constant_lab.projector, 2)


def test_negative_k_max(constant_lab):
    with pytest.raises(ValueError, match="nonnegative"):
        scattering_control_iterate(constant_lab.initial_data(), constant_lab.projector, -1)


def test_recovery_times_out_of_range(constant_lab, constant_trace):
    projector = constant_lab.projector
    with pytest.raises(ValueError, match=r"\[0, T\]"):
        interior_field_recovery(constant_trace, -0.1, projector)
    with pytest.raises(ValueError, match=r"\[0, T\]"):
        interior_field_recovery(constant_trace, 0.6, projector)
    with pytest.raises(ValueError, match=r"\[0, 2T\]"):
        wavefield_recovery_outside(constant_trace, 1.5, projector)


def test_minimal_norm_lemma_with_unit_eigenvalue():
    result = minimal_norm_neumann_check(np.diag([1.0, 0.5]), np.array([0.0, 1.0]))
    assert result.oracle == pytest.approx([0.0, 4.0 / 3.0])
    assert result.series == pytest.approx([0.0, 4.0 / 3.0])
    assert result.difference < 1e-12


def test_minimal_norm_lemma_random_contractions():
    rng = np.random.default_rng(1)
    for n in (2, 5, 12):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = q @ np.diag(rng.uniform(-0.95, 0.95, n)) @ q.T
        A = 0.5 * (A + A.T)
        result = minimal_norm_neumann_check(A, rng.standard_normal(n))
        assert result.difference < 1e-8


@pytest.mark.parametrize(
    "A, x, message",
    [
        (np.eye(2), np.ones(3), "Shapes"),
        (np.eye(13) * 0.5, np.ones(13), "exceeds 12"),
        (np.array([[0.0, 0.5], [0.1, 0.0]]), np.ones(2), "symmetric"),
        (np.diag([1.5, 0.0]), np.ones(2), "exceeds 1"),
    ],
)
def test_minimal_norm_lemma_errors(A, x, message):
    with pytest.raises(ValueError, match=message):
        minimal_norm_neumann_check(A, x)
