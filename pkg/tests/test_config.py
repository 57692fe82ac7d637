import pytest
from pydantic import ValidationError

from models.config import DomainConfig, LayeredConfig, NormConfig, RaysConfig, RunConfig

BASE = {
    "T": 0.5,
    "grid": {"dim": 1, "spacing": 0.01, "lower": [-1.0], "upper": [2.0]},
    "domain": {"theta": {"lower": [0.0], "upper": [1.0]}},
    "source": {"kind": "pulse", "center": [0.5]},
}


def build(**changes):
    return RunConfig.model_validate({**BASE, **changes})


def test_minimal_config_gets_defaults():
    config = build()
    assert config.solver.cfl == 0.8
    assert config.solver.projection == "cg"
    assert config.solver.cg_rtol == 1e-10
    assert config.iteration.k_max == 30
    assert config.rays is None
    assert config.domain.boxes()["omega"] == config.domain.theta


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"T": 0.0}, "T must be positive"),
        ({"grid": {"dim": 3, "spacing": 0.1, "lower": [0.0], "upper": [1.0]}}, "grid.dim"),
        ({"grid": {"dim": 1, "spacing": 0.1, "lower": [0.0, 0.0], "upper": [1.0, 1.0]}}, "coordinates"),
        ({"domain": {"theta": {"lower": [-1.0], "upper": [1.0]}}}, "strictly inside"),
        ({"source": {"kind": "pulse", "center": [1.5]}}, "inside Θ"),
        ({"source": {"kind": "pulse", "center": [0.5], "width": 0.0}}, "width"),
        ({"solver": {"cfl": 1.0}}, "cfl"),
        ({"medium": {"layered": {"interfaces": [2.5], "speeds": [1.0, 2.0]}}}, "inside Υ"),
        ({"iteration": {"k_max": -1}}, "non-negative"),
    ],
)
def test_invalid_configs(changes, message):
    with pytest.raises(ValidationError, match=message):
        build(**changes)


def test_zero_source_skips_centre_checks():
    config = build(source={"kind": "zero", "center": [9.0]})
    assert config.source.kind == "zero"


def test_domain_nesting():
    with pytest.raises(ValidationError, match="Θ″ ⊆ Θ"):
        DomainConfig.model_validate(
            {"theta": {"lower": [0.0], "upper": [1.0]}, "theta_dprime": {"lower": [-0.1], "upper": [1.0]}}
        )


def test_layered_config():
    with pytest.raises(ValidationError, match="one more speed"):
        LayeredConfig(interfaces=[0.5], speeds=[1.0])
    with pytest.raises(ValidationError, match="positive"):
        LayeredConfig(interfaces=[0.5], speeds=[1.0, -2.0])


def test_norm_custom_needs_file():
    with pytest.raises(ValidationError, match="custom_file"):
        NormConfig(subspace="custom")


def test_rays_boundaries_ordered():
    with pytest.raises(ValidationError, match="boundary ≤ boundary_dprime ≤ boundary_prime"):
        RaysConfig(boundary=0.0, boundary_dprime=0.2, boundary_prime=0.1)
    rays = RaysConfig(boundary=0.0, boundary_dprime=0.1)
    assert rays.speeds == [1.0]
