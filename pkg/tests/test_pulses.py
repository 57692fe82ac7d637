import numpy as np
import pytest

from models.config import SourceConfig
from pipeline.pulses import directed_pulse, gaussian_probe, random_field_data, source_data, wave_packet


def test_directed_pulse_peak_and_boundary(constant_lab):
    h = directed_pulse(constant_lab.medium, 0.25, 0.03)
    assert np.max(np.abs(h.u0.values)) == pytest.approx(1.0, rel=1e-9)
    assert h.u0.values[0] == 0.0 and h.u0.values[-1] == 0.0


def test_forward_pulse_velocity_is_minus_c_gradient(constant_lab):
    h = directed_pulse(constant_lab.medium, 0.25, 0.03)
    gradient = np.gradient(h.u0.values, constant_lab.grid.spacing)
    scale = np.max(np.abs(h.u1.values))
    assert np.max(np.abs(h.u1.values + gradient)) < 0.02 * scale


def test_standing_and_backward(constant_lab):
    forward = directed_pulse(constant_lab.medium, 0.25, 0.03)
    backward = directed_pulse(constant_lab.medium, 0.25, 0.03, direction="backward")
    standing = directed_pulse(constant_lab.medium, 0.25, 0.03, direction="standing")
    assert np.allclose(backward.u1.values, -forward.u1.values)
    assert not np.any(standing.u1.values)


def test_directed_pulse_errors(constant_lab, lab_2d):
    with pytest.raises(ValueError, match="one-dimensional"):
        directed_pulse(lab_2d.medium, 0.25, 0.03)
    with pytest.raises(ValueError, match="Unknown pulse direction"):
        directed_pulse(constant_lab.medium, 0.25, 0.03, direction="sideways")


def test_gaussian_probe(constant_lab):
    probe = gaussian_probe(constant_lab.medium, 0.5, 0.02)
    assert np.max(probe.u0.values) == pytest.approx(1.0)


def test_wave_packet_2d(lab_2d):
    h = wave_packet(lab_2d.medium, (0.0, 0.25), 0.04, 0.12, angle_deg=30.0)
    assert np.max(np.abs(h.u0.values)) == pytest.approx(1.0, rel=1e-6)
    assert not np.any(h.u0.values[lab_2d.grid.boundary_mask()])
    assert not np.any(h.u0.values[~lab_2d.nest.theta])


def test_random_field_data_mask(constant_lab):
    h = random_field_data(constant_lab.grid, np.random.default_rng(0), constant_lab.nest.omega)
    assert not np.any(h.u0.values[~constant_lab.nest.omega])
    assert np.any(h.u1.values)


def test_source_data(constant_lab, lab_2d):
    assert source_data(SourceConfig(kind="zero"), constant_lab.medium).is_zero()
    pulse = source_data(SourceConfig(kind="pulse", center=[0.25], width=0.03), constant_lab.medium)
    assert np.array_equal(pulse.u0.values, directed_pulse(constant_lab.medium, 0.25, 0.03).u0.values)
    with pytest.raises(ValueError, match="does not match"):
        source_data(SourceConfig(kind="packet", center=[0.1]), lab_2d.medium)
    with pytest.raises(ValueError, match="one-dimensional"):
        source_data(SourceConfig(kind="pulse", center=[0.0, 0.25]), lab_2d.medium)
