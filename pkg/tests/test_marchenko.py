import numpy as np
import pytest

from conftest import load_preset
from experiments._base import Laboratory
from experiments.marchenko import MarchenkoExperiment
from models.traces import BoundaryTrace, ReflectionKernel
from pipeline.marchenko import (
    boundary_crossing,
    boundary_node,
    detect_arrivals,
    ensure_clear_boundary,
    incoming_trace,
    operator_norm_estimate,
    pressure_tail_iterate,
    reflection_response,
    rose_operator,
    rose_tail_iterate,
    velocity_tail_iterate,
    window_times,
)
from pipeline.pulses import directed_pulse


def test_reflection_response_condition(layered_lab):
    """
    Test that a Gaussian probe of width σ has condition exp(9σ²/σ_signal²) at the band edge.
    """
    kernel = reflection_response(layered_lab.propagator, 0.015, 0.03)
    assert 5.0 < kernel.condition < 15.0
    assert kernel.dt == layered_lab.propagator.dt
    assert kernel.lags[kernel.lag0] == 0.0


def test_reflection_response_ill_conditioned(layered_lab):
    with pytest.raises(ValueError, match="ill-conditioned"):
        reflection_response(layered_lab.propagator, 0.06, 0.03)


def test_reflection_response_needs_unit_speed_outside(layered_lab):
    with pytest.raises(ValueError, match="c ≡ 1 outside"):
        reflection_response(layered_lab.propagator, 0.015, 0.03, boundary=0.6)


def test_boundary_node(constant_lab, lab_2d):
    node = boundary_node(constant_lab.propagator)
    x = constant_lab.grid.coordinates()[0]
    assert x[constant_lab.propagator.interior[node]] == pytest.approx(0.0)
    with pytest.raises(ValueError, match="one-dimensional"):
        boundary_node(lab_2d.propagator)


def test_incoming_trace_of_rightward_pulse(constant_lab):
    """
    Test that a rightward pulse at x = 0.25 crossed the boundary point 0.25 before t = 0.
    """
    propagator = constant_lab.propagator
    r0 = directed_pulse(constant_lab.medium, 0.25, 0.03)
    trace = incoming_trace(r0, propagator)
    assert np.array_equal(trace.times, window_times(propagator))
    assert not np.any(trace.values[trace.times > 0])
    weight = trace.values**2
    center = np.sum(trace.times * weight) / np.sum(weight)
    assert center == pytest.approx(-0.25, abs=2 * propagator.dt)


def test_rose_operator_window():
    times = np.arange(-4, 9) * 0.1
    kernel = ReflectionKernel(np.array([1.0]), 0.1, 0, 0.01, 1.0)
    values = np.zeros_like(times)
    values[times.searchsorted(-0.2 - 1e-9)] = 1.0
    out = rose_operator(kernel, BoundaryTrace(times, values), 0.4)
    # An impulse at s = −0.2 maps to 2T − (−0.2) = 1.0, outside (0, 2T].
    assert not np.any(out.values)
    values = np.zeros_like(times)
    values[times.searchsorted(0.3 - 1e-9)] = 1.0
    out = rose_operator(kernel, BoundaryTrace(times, values), 0.4)
    assert out.times[np.flatnonzero(out.values)] == pytest.approx([0.5])


def test_rose_operator_misaligned():
    times = np.arange(5) * 0.1
    kernel = ReflectionKernel(np.array([1.0]), 0.05, 0, 0.01, 1.0)
    with pytest.raises(ValueError, match="misaligned"):
        rose_operator(kernel, BoundaryTrace(times, np.zeros(5)), 0.2)


def test_tail_residual_keys(layered_lab):
    r0 = layered_lab.initial_data()
    pressure = pressure_tail_iterate(r0, layered_lab.projector, 2)
    velocity = velocity_tail_iterate(r0, layered_lab.projector, 2)
    assert set(pressure.residuals) == {"match", "harmonicity"}
    assert set(velocity.residuals) == {"match", "velocity"}
    assert len(pressure.partial_sums) == 3
    assert pressure.to_frame()["j"].tolist() == [0, 1, 2]


def test_tail_iterations_are_one_dimensional(lab_2d):
    with pytest.raises(ValueError, match="one-dimensional"):
        pressure_tail_iterate(lab_2d.initial_data(), lab_2d.projector, 1)


def test_boundary_trace_validation():
    with pytest.raises(ValueError, match="uniformly spaced"):
        BoundaryTrace(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    with pytest.raises(ValueError, match="one value per sample"):
        BoundaryTrace(np.zeros(3), np.zeros(2))


def test_arrival_crossing_the_boundary_is_rejected(layered_config):
    """
    Test that a geometry whose second primary straddles the boundary point at time 2T is refused.
    """
    lab = Laboratory.from_config(layered_config)
    r0 = lab.initial_data()
    assert boundary_crossing(r0, lab.propagator) > 1e-3
    experiment = MarchenkoExperiment(layered_config)
    with pytest.raises(ValueError, match="crosses the boundary point"):
        experiment.execute()
    assert experiment.status.state == "failed"


def test_free_pulse_leaves_the_boundary_clear(constant_lab):
    r0 = constant_lab.initial_data()
    assert ensure_clear_boundary(r0, constant_lab.propagator) < 1e-3


@pytest.mark.integration
def test_rose_and_cauchy_tails_agree():
    """
    Test that the boundary trace of the Cauchy pressure tail matches the Rose tail built from the
    reflection response, and that the Rose tail carries the expected arrivals.
    """
    result = MarchenkoExperiment(load_preset("rose-comparison")).execute()
    summary = result.summary
    assert summary["rose_cauchy_equivalence"] <= 1e-3
    assert summary["pressure_residuals"]["harmonicity"] <= 1e-3
    assert summary["pressure_residuals"]["match"] <= 1e-3
    assert summary["velocity_residuals"]["velocity"] <= 1e-3
    assert summary["velocity_residuals"]["match"] <= 1e-3
    assert summary["even_term_identity"] < 1e-10
    assert {"tails", "kernel", "pressure_terms", "velocity_terms", "arrivals"} <= set(result.tables)

    arrivals = result.tables["arrivals"]
    for s, amplitude in ((0.23, -3 / 5), (0.37, -1 / 5), (0.73, 1 / 3)):
        nearest = arrivals.iloc[int(np.argmin(np.abs(arrivals["s"].to_numpy() - s)))]
        assert nearest["s"] == pytest.approx(s, abs=5e-3)
        assert nearest["amplitude"] == pytest.approx(amplitude, abs=2e-2)


def test_rose_tail_alternates_between_mirror_times():
    times = np.arange(-4, 9) * 0.1
    kernel = ReflectionKernel(np.array([1.0]), 0.1, 0, 0.01, 1.0)
    values = np.zeros_like(times)
    values[7] = 1.0  # s = 0.3
    tail, norms = rose_tail_iterate(kernel, BoundaryTrace(times, values), 0.4, 3)
    # −δ(0.5) + δ(0.3) − δ(0.5)
    assert tail.values[9] == pytest.approx(-2.0)
    assert tail.values[7] == pytest.approx(1.0)
    assert np.count_nonzero(tail.values) == 2
    assert norms == pytest.approx([np.sqrt(0.1)] * 3)


def test_detect_arrivals_matched_filter():
    dt = 0.01
    template_times = np.arange(-10, 11) * dt
    template = BoundaryTrace(template_times, np.exp(-((template_times / 0.02) ** 2)))
    times = np.arange(100) * dt

    def bump(t0):
        return np.exp(-(((times - t0) / 0.02) ** 2))

    trace = BoundaryTrace(times, 0.5 * bump(0.3) - 0.2 * bump(0.6))
    arrivals = detect_arrivals(trace, template, half_window=0.1)
    assert [a.time for a in arrivals] == pytest.approx([0.3, 0.6], abs=1e-9)
    assert [a.amplitude for a in arrivals] == pytest.approx([0.5, -0.2], abs=1e-6)


def test_operator_norm_estimate_is_bounded(constant_lab):
    estimate = operator_norm_estimate(
        constant_lab.projector, "rightward", np.random.default_rng(2), iterations=5, width=0.03
    )
    assert -1e-12 <= estimate.estimate <= 1.0 + 1e-6
    assert 1 <= len(estimate.history) <= 5


def test_operator_norm_estimate_errors(constant_lab, lab_2d):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="Unknown subspace"):
        operator_norm_estimate(constant_lab.projector, "sideways", rng)
    with pytest.raises(ValueError, match="starting data"):
        operator_norm_estimate(constant_lab.projector, "custom", rng)
    with pytest.raises(ValueError, match="one-dimensional"):
        operator_norm_estimate(lab_2d.projector, "rightward", rng)
