"""
Unit tests for the energy-orthogonal projections and their harmonic extensions.
"""

import numpy as np
import pytest

from pipeline.projections import Projector, stationary_harmonic_residual
from pipeline.pulses import random_field_data


@pytest.fixture(scope="module")
def fields(constant_lab):
    rng = np.random.default_rng(5)
    return [random_field_data(constant_lab.grid, rng) for _ in range(2)]


@pytest.mark.parametrize("t", [0.0, 0.2, -0.3])
def test_inside_projection_is_idempotent(constant_lab, fields, t):
    projector = constant_lab.projector
    propagator = constant_lab.propagator
    h = fields[0]
    once = projector.project_inside(h, t)
    twice = projector.project_inside(once, t)
    assert propagator.norm(twice - once) <= 1e-9 * propagator.norm(h)


@pytest.mark.parametrize("t", [0.0, 0.2])
def test_projections_are_self_adjoint(constant_lab, fields, t):
    projector = constant_lab.projector
    propagator = constant_lab.propagator
    f, g = fields
    scale = propagator.norm(f) * propagator.norm(g)
    for project in (projector.project_inside, projector.project_outside, projector.project_interior):
        lhs = propagator.inner(project(f, t), g)
        rhs = propagator.inner(f, project(g, t))
        assert abs(lhs - rhs) <= 1e-9 * scale


def test_pythagoras(constant_lab, fields):
    """
    Test that ‖h‖² = ‖π̄h‖² + ‖π*h‖².
    """
    projector = constant_lab.projector
    propagator = constant_lab.propagator
    h = fields[0]
    total = propagator.energy(h)
    split = propagator.energy(projector.project_inside(h, 0.1)) + propagator.energy(projector.project_outside(h, 0.1))
    assert split == pytest.approx(total, rel=1e-9)


def test_outside_projection_vanishes_inside(constant_lab, fields):
    projector = constant_lab.projector
    out = projector.project_outside(fields[0], 0.2)
    mask = projector.mask(0.2)
    assert not np.any(out.u0.values[mask])
    assert not np.any(out.u1.values[mask])


def test_inside_projection_is_harmonic_outside(constant_lab, fields):
    projector = constant_lab.projector
    projected = projector.project_inside(fields[0], 0.2)
    residual = stationary_harmonic_residual(projected, projector.mask(0.2, "outside"), constant_lab.propagator)
    assert residual < 1e-6


def test_interior_projection_is_idempotent(constant_lab, fields):
    projector = constant_lab.projector
    propagator = constant_lab.propagator
    once = projector.project_interior(fields[0], 0.2)
    twice = projector.project_interior(once, 0.2)
    assert propagator.norm(twice - once) <= 1e-9 * propagator.norm(fields[0])
    assert propagator.inner(once, projector.project_outside(fields[1], 0.2)) == pytest.approx(
        0.0, abs=1e-9 * propagator.norm(fields[0]) * propagator.norm(fields[1])
    )


def test_complementary_part_is_harmonic_outside(constant_lab, fields):
    projector = constant_lab.projector
    rest = projector.complementary(fields[0], 0.2)
    assert stationary_harmonic_residual(rest, projector.mask(0.2, "outside"), constant_lab.propagator) < 1e-6


def test_cg_is_the_default_and_agrees_with_direct(constant_lab, fields):
    propagator = constant_lab.propagator
    assert constant_lab.projector.solver == "cg"
    iterative = constant_lab.projector.project_inside(fields[0], 0.2)
    direct = Projector(propagator, constant_lab.depth, solver="direct").project_inside(fields[0], 0.2)
    assert propagator.norm(iterative - direct) <= 1e-6 * propagator.norm(direct)


def test_projection_2d(lab_2d):
    projector = lab_2d.projector
    propagator = lab_2d.propagator
    h = random_field_data(lab_2d.grid, np.random.default_rng(2))
    once = projector.project_inside(h, 0.1)
    assert propagator.norm(projector.project_inside(once, 0.1) - once) <= 1e-9 * propagator.norm(h)
    assert not np.any(projector.project_outside(h, 0.1).u0.values[projector.mask(0.1)])


def test_unknown_solver(constant_lab):
    with pytest.raises(ValueError, match="Unknown projection solver"):
        Projector(constant_lab.propagator, constant_lab.depth, solver="jacobi")
