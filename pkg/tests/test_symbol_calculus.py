from fractions import Fraction

import numpy as np
import pytest

from models.rays import LayeredModel
from pipeline.ray_tracing import make_covector, symbol_from_covectors, trace_rays
from pipeline.symbol_calculus import (
    apply_sigma_star,
    double_reflection,
    flux_residual,
    layered_scattering_series,
    mdt_symbol,
    mdt_weight,
    random_symbol_norm_check,
    ray_path_sums,
    sigma_star_weight,
    symbol_neumann_iterate,
)


@pytest.fixture(scope="module")
def rational_model():
    return LayeredModel(
        (Fraction(-3, 10), Fraction(3, 5)),
        (1, Fraction(3, 2), 1),
        boundary=0,
        boundary_dprime=Fraction(3, 80),
        boundary_prime=Fraction(3, 40),
        convention="pressure",
    )


@pytest.fixture(scope="module")
def float_model():
    return LayeredModel((-0.3, 0.6), (1.0, 1.5, 1.0))


def test_series_matches_ray_path_sums(rational_model):
    """
    Test that summing the scattering series over event counts equals summing broken-ray amplitudes over paths.
    """
    source = make_covector(rational_model, Fraction(13, 10), "up")
    series, _ = layered_scattering_series(rational_model, source, Fraction(3), 6)
    sums = ray_path_sums(trace_rays(rational_model, source, Fraction(3), max_events=6))
    assert series
    for key in set(series) | set(sums):
        assert series.get(key, 0) == sums.get(key, 0)


def test_series_matches_ray_path_sums_float(float_model):
    source = make_covector(float_model, 0.1, "down", p=0.3)
    series, _ = layered_scattering_series(float_model, source, 2.5, 5)
    sums = ray_path_sums(trace_rays(float_model, source, 2.5, max_events=5))
    for key in set(series) | set(sums):
        assert abs(complex(series.get(key, 0)) - complex(sums.get(key, 0))) <= 1e-12


@pytest.mark.parametrize("p", [0.0, 0.3, 0.8])
def test_flux_is_conserved(float_model, p):
    assert flux_residual(float_model, p) <= 1e-12


def test_random_symbol_norm_bound(float_model):
    worst = random_symbol_norm_check(float_model, np.random.default_rng(4), trials=20, T=1.0)
    assert 0 < worst <= 1 + 1e-12


def test_double_reflection_keeps_exterior_loops_only(float_model):
    """
    Test that an exterior ray heading away returns unchanged while a deep ray is cut by σ*.
    """
    outside = symbol_from_covectors(0, [(make_covector(float_model, -1.0, "up"), 1.0)])
    image, lost = double_reflection(outside, float_model, 1.0)
    assert lost == 0
    assert image.support_size == 1
    assert image.norm() == pytest.approx(1.0)

    deep = symbol_from_covectors(0, [(make_covector(float_model, 1.2, "down"), 1.0)])
    image, _ = double_reflection(deep, float_model, 1.0)
    assert image.support_size == 0


def test_sigma_star_weight():
    assert sigma_star_weight(-0.1, 0.0, 0.1) == 1
    assert sigma_star_weight(0.1, 0.0, 0.1) == 0
    assert sigma_star_weight(0.05, 0.0, 0.1) == pytest.approx(0.5)
    # A sharp cutoff when Θ″ = Θ.
    assert sigma_star_weight(0.0, 0.0, 0.0) == 1
    assert sigma_star_weight(1e-9, 0.0, 0.0) == 0


def test_mdt_weight():
    assert mdt_weight(1.2, 1.5, 1.0) == 1
    assert mdt_weight(0.5, 1.0, 1.0) == 0
    assert mdt_weight(0.8, 1.2, 1.0) == pytest.approx(0.5)


def test_apply_sigma_star_keeps_outside_entries(rational_model):
    vector = symbol_from_covectors(
        0,
        [
            (make_covector(rational_model, Fraction(-1, 10), "down"), 1),
            (make_covector(rational_model, Fraction(1, 2), "down"), 1),
        ],
    )
    weighted = apply_sigma_star(vector, rational_model)
    assert weighted.support_size == 1
    assert weighted.amplitude_at((Fraction(-1, 10), "down", 1)) == 1


def test_symbol_neumann_iterate_records(rational_model):
    h0 = symbol_from_covectors(
        0,
        [
            (make_covector(rational_model, Fraction(13, 10), "up"), 1),
            (make_covector(rational_model, Fraction(13, 10), "down"), 1),
        ],
    )
    trace = symbol_neumann_iterate(h0, rational_model, Fraction(1), 3)
    assert len(trace.iterates) == len(trace.norms) == len(trace.inside_norms) == 4
    assert trace.norms[0] == pytest.approx(np.sqrt(2.0))
    assert trace.residuals == []


def test_mdt_symbol_keeps_only_the_deep_transmission(rational_model):
    """
    Test that at T = 1 only the source heading down and away keeps its symbol.
    """
    h0 = symbol_from_covectors(
        0,
        [
            (make_covector(rational_model, Fraction(13, 10), "up"), 1),
            (make_covector(rational_model, Fraction(13, 10), "down"), 1),
        ],
    )
    mdt = mdt_symbol(h0, rational_model, Fraction(1))
    assert mdt.support_size == 1
    assert mdt.amplitude_at((Fraction(23, 10), "down", 2)) == 1
