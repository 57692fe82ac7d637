"""
Unit tests for the leapfrog propagator: energy conservation, reversibility, self-adjointness of R and accuracy.
"""

import numpy as np
import pytest

from models.fields import CauchyData, GridSpec, Medium
from pipeline.geometry_depth import compute_depth
from pipeline.pulses import directed_pulse, random_field_data
from pipeline.wave_solver import (
    Propagator,
    diamond_vanishing_check,
    stiffness_matrix,
    time_reverse,
    translation_convergence,
)


@pytest.fixture(scope="module")
def random_pair(layered_lab):
    rng = np.random.default_rng(3)
    theta = layered_lab.nest.theta
    return random_field_data(layered_lab.grid, rng, theta), random_field_data(layered_lab.grid, rng, theta)


def test_step_divides_control_time(constant_lab):
    propagator = constant_lab.propagator
    assert propagator.steps_per_T % 2 == 0
    assert propagator.steps_per_T * propagator.dt == pytest.approx(0.5, rel=1e-12)
    assert propagator.dt <= 0.8 * 0.005


def test_energy_conserved_over_2T(layered_lab, random_pair):
    propagator = layered_lab.propagator
    h, _ = random_pair
    energies = np.array(
        [propagator.energy(propagator.from_vectors(u, v)) for _, u, v in propagator.stream(h, 2 * propagator.T)]
    )
    assert np.max(np.abs(energies - energies[0])) / energies[0] < 1e-9


def test_energy_matches_inner_product(layered_lab, random_pair):
    propagator = layered_lab.propagator
    h, _ = random_pair
    assert propagator.energy(h) == pytest.approx(propagator.inner(h, h), rel=1e-12)


def test_energy_density_nonnegative(layered_lab, random_pair):
    h, _ = random_pair
    assert layered_lab.propagator.energy_density(h).min() > -1e-12


def test_reflection_is_an_involution(layered_lab, random_pair):
    propagator = layered_lab.propagator
    h, _ = random_pair
    back = propagator.reflect(propagator.reflect(h))
    assert propagator.norm(back - h) <= 1e-9 * propagator.norm(h)


def test_reflection_is_self_adjoint(layered_lab, random_pair):
    """
    Test that ⟨Rf, g⟩ = ⟨f, Rg⟩ in the conserved energy.
    """
    propagator = layered_lab.propagator
    f, g = random_pair
    lhs = propagator.inner(propagator.reflect(f), g)
    rhs = propagator.inner(f, propagator.reflect(g))
    assert abs(lhs - rhs) <= 1e-8 * propagator.norm(f) * propagator.norm(g)


def test_backward_propagation_inverts_forward(layered_lab, random_pair):
    propagator = layered_lab.propagator
    h, _ = random_pair
    back = propagator.propagate(propagator.propagate(h, 0.3), -0.3)
    assert propagator.norm(back - h) <= 1e-9 * propagator.norm(h)


def test_time_reverse_flips_velocity(constant_lab):
    h = directed_pulse(constant_lab.medium, 0.25, 0.03)
    reversed_h = time_reverse(h)
    assert np.array_equal(reversed_h.u0.values, h.u0.values)
    assert np.array_equal(reversed_h.u1.values, -h.u1.values)


def test_finite_speed_of_propagation(constant_lab):
    """
    Test that the field stays exactly zero beyond one node per step from the initial support.
    """
    propagator = constant_lab.propagator
    h = directed_pulse(constant_lab.medium, 0.25, 0.03)
    x = constant_lab.grid.coordinates()[0]
    support = x[np.abs(h.u0.values) > 0]
    steps = propagator.steps_for(0.5)
    out = propagator.propagate(h, 0.5)
    far = x > support.max() + (steps + 2) * constant_lab.grid.spacing
    assert not np.any(out.u0.values[far])
    assert not np.any(out.u1.values[far])
    # Beyond the travel-time neighbourhood only numerical precursors remain.
    outside = (x > support.max() + 0.55) | (x < support.min() - 0.55)
    assert np.max(np.abs(out.u0.values[outside])) < 1e-6


def test_rightward_pulse_converges_to_translate():
    """
    Test second-order convergence of a rightward pulse to its d'Alembert translate in c ≡ 1.
    """
    errors = translation_convergence((0.01, 0.005))
    assert errors[1] < 0.01
    assert 3.0 < errors[0] / errors[1] < 5.0


def test_kinetic_and_boundary_energy(constant_lab):
    h = directed_pulse(constant_lab.medium, 0.25, 0.03, direction="standing")
    propagator = constant_lab.propagator
    assert propagator.kinetic_energy(h) == 0.0
    assert propagator.boundary_energy(h) == 0.0
    assert propagator.energy(h, constant_lab.nest.theta) == pytest.approx(propagator.energy(h), rel=1e-12)


def test_stiffness_is_symmetric():
    grid = GridSpec.from_bounds([0.0, 0.0], [0.5, 0.4], 0.1)
    K = stiffness_matrix(grid)
    assert abs(K - K.T).max() == 0.0
    assert np.allclose(K @ np.ones(grid.size), 0.0)


def test_cfl_violation():
    grid = GridSpec.from_bounds([0.0, 0.0], [1.0, 1.0], 0.1)
    with pytest.raises(ValueError, match="CFL"):
        Propagator(Medium.constant(grid), 0.5, cfl=0.8)


def test_step_must_divide_T(constant_lab):
    with pytest.raises(ValueError, match="does not divide"):
        Propagator(constant_lab.medium, 0.5, dt=0.0033)
    with pytest.raises(ValueError, match="CFL bound"):
        Propagator(constant_lab.medium, 0.5, dt=0.01)


def test_grid_mismatch(constant_lab):
    other = GridSpec.from_bounds([-1.0], [1.0], 0.01)
    with pytest.raises(ValueError, match="Grid mismatch"):
        constant_lab.propagator.propagate(CauchyData.zeros(other), 0.1)


def test_diamond_check_of_zero_data(constant_lab):
    depth = compute_depth(constant_lab.nest, constant_lab.medium)
    report = diamond_vanishing_check(CauchyData.zeros(constant_lab.grid), constant_lab.propagator, depth.d)
    assert report.residual == 0.0
    assert report.relative == 0.0
    assert len(report.times) == 2 * constant_lab.propagator.steps_per_T + 1
