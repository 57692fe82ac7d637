"""
Unit tests for interface coefficients, broken rays, cotangent depth and symbol propagation in flat layers.
"""

from fractions import Fraction

import pytest

from models.rays import LayeredModel, Mode
from pipeline.ray_tracing import (
    cotangent_depth,
    depth_profile,
    direct_transmission,
    make_covector,
    propagate_symbol,
    rt_coefficients,
    scattering_matrix,
    symbol_from_covectors,
    time_reverse_symbol,
    trace_rays,
)


@pytest.fixture(scope="module")
def step_model():
    return LayeredModel((0.5,), (1.0, 2.0))


@pytest.fixture(scope="module")
def rational_model():
    return LayeredModel((Fraction(-3, 10), Fraction(3, 5)), (1, Fraction(3, 2), 1), convention="pressure")


def test_rt_coefficients_exact():
    rt = rt_coefficients(Fraction(1), Fraction(2))
    assert rt.r == Fraction(1, 3)
    assert rt.t == Fraction(4, 3)
    assert float(rt.r_energy) ** 2 + float(rt.t_energy) ** 2 == pytest.approx(1.0, abs=1e-15)


def test_direct_transmission_through_two_interfaces():
    """
    Test the energy kept by the direct arrival of the two-interface medium: 8/9 at the first
    interface and 16/25 at the second, and nothing lost before an interface is reached.
    """
    model = LayeredModel((Fraction(1, 2), Fraction(1)), (Fraction(1), Fraction(2), Fraction(1, 2)))
    start = Fraction(13, 100)
    assert direct_transmission(model, start, Fraction(4, 5)) == Fraction(128, 225)
    assert direct_transmission(model, start, Fraction(1, 2)) == Fraction(8, 9)
    assert direct_transmission(model, start, Fraction(1, 4)) == 1


def test_rt_coefficients_evanescent():
    rt = rt_coefficients(1.0, 2.0, p=0.7)
    assert rt.evanescent
    assert abs(rt.r) == pytest.approx(1.0)
    assert rt.t_energy == 0


def test_rt_coefficients_glancing_and_invalid():
    with pytest.raises(ValueError, match="glancing"):
        rt_coefficients(1.0, 2.0, p=0.9999)
    with pytest.raises(ValueError, match="positive"):
        rt_coefficients(0.0, 1.0)


def test_pressure_blocks(rational_model):
    """
    Test the exact 2×2 blocks of speeds 1 | 3/2 | 1 at normal incidence.
    """
    blocks = scattering_matrix(rational_model).blocks
    fifth = Fraction(1, 5)
    assert blocks[0].matrix == ((fifth, 4 * fifth), (6 * fifth, -fifth))
    assert blocks[1].matrix == ((-fifth, 6 * fifth), (4 * fifth, fifth))


def test_model_validation():
    with pytest.raises(ValueError, match="one more speed"):
        LayeredModel((0.5,), (1.0,))
    with pytest.raises(ValueError, match="boundary ≤ dprime ≤ prime"):
        LayeredModel((), (1.0,), boundary=0.2, boundary_dprime=0.1)
    with pytest.raises(ValueError, match="interface"):
        make_covector(LayeredModel((0.5,), (1.0, 2.0)), 0.5, "down")


def test_trace_rays_single_interface(step_model):
    eta = make_covector(step_model, 0.2, "down")
    fan = trace_rays(step_model, eta, 1.0)
    rays = {ray.path: ray for ray in fan.rays}
    assert set(rays) == {"R", "T"}
    assert fan.alive_mass == pytest.approx(1.0, abs=1e-12)
    assert rays["R"].segments[-1].end.z == pytest.approx(-0.2)
    assert rays["T"].segments[-1].end.z == pytest.approx(1.9)
    assert rays["T"].events[0].time == pytest.approx(0.3)


def test_trace_rays_budget(rational_model):
    eta = make_covector(rational_model, Fraction(13, 10), "up")
    fan = trace_rays(rational_model, eta, 4, max_events=2)
    assert any(ray.termination == "budget" for ray in fan.rays)
    assert fan.truncated_mass > 0


def test_cotangent_depth_constant():
    model = LayeredModel((), (1.0,))
    assert cotangent_depth(model, make_covector(model, 0.7, "down")) == pytest.approx(0.7)
    assert cotangent_depth(model, make_covector(model, -0.3, "down")) == pytest.approx(-0.3)


def test_cotangent_depth_exact_through_interface():
    model = LayeredModel((Fraction(1, 2),), (1, 2))
    depth = cotangent_depth(model, make_covector(model, Fraction(3, 2), "down"))
    assert depth == Fraction(1)


def test_propagate_symbol_conserves_energy(step_model):
    vector = symbol_from_covectors(0, [(make_covector(step_model, 0.2, "down"), 1.0)])
    out, truncated = propagate_symbol(vector, step_model, 1.0)
    assert truncated == 0.0
    assert out.norm() == pytest.approx(1.0, abs=1e-12)
    assert out.support_size == 2
    assert out.t == 1.0


def test_propagate_symbol_exact(rational_model):
    vector = symbol_from_covectors(0, [(make_covector(rational_model, Fraction(13, 10), "up"), 1)])
    out, _ = propagate_symbol(vector, rational_model, Fraction(1))
    # Reflected downward at z = 3/5 at t = 7/10, then 3/10 further down.
    assert out.amplitude_at((Fraction(9, 10), "down", 2)) == Fraction(1, 5)


def test_propagate_symbol_backward_rejected(step_model):
    vector = symbol_from_covectors(0, [(make_covector(step_model, 0.2, "down"), 1.0)])
    with pytest.raises(ValueError, match="forward only"):
        propagate_symbol(vector, step_model, -0.1)


def test_time_reverse_symbol_flips_modes(step_model):
    vector = symbol_from_covectors(0, [(make_covector(step_model, 0.2, "down"), 2.0)])
    reversed_vector = time_reverse_symbol(vector)
    (entry,) = reversed_vector.entries.values()
    assert entry.covector.mode is Mode.UP
    assert entry.amplitude == 2.0


def test_depth_profile_has_unit_slope():
    model = LayeredModel((), (1.0,))
    fan = trace_rays(model, make_covector(model, 0.7, "down"), 0.5)
    profile = depth_profile(model, fan.rays[0], samples=11)
    assert len(profile) == 11
    for t, d in profile:
        assert d == pytest.approx(0.7 + t)
