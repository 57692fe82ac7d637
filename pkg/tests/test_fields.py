import numpy as np
import pytest

from models.fields import CauchyData, DomainNest, GridSpec, LayeredProfile, Medium, ScalarField


@pytest.fixture(scope="module")
def grid():
    return GridSpec.from_bounds([-1.0], [1.0], 0.1)


def test_grid_from_bounds(grid):
    """
    Test that the first and last nodes sit on the box corners.
    """
    assert grid.extent == (21,)
    assert grid.upper == pytest.approx((1.0,))
    assert grid.coordinates()[0][10] == pytest.approx(0.0)


def test_grid_from_bounds_rejects_fractional_cells():
    with pytest.raises(ValueError, match="whole number of cells"):
        GridSpec.from_bounds([0.0], [1.0], 0.3)


def test_grid_rejects_3d():
    with pytest.raises(ValueError, match="1D and 2D"):
        GridSpec((4, 4, 4), 0.1, (0.0, 0.0, 0.0))


def test_boundary_mask_2d():
    grid = GridSpec.from_bounds([0.0, 0.0], [0.4, 0.3], 0.1)
    mask = grid.boundary_mask()
    assert mask.shape == (5, 4)
    assert mask.sum() == 2 * 5 + 2 * 4 - 4
    assert not mask[2, 1]


def test_nearest_index_outside_grid(grid):
    assert grid.nearest_index([0.26]) == (13,)
    with pytest.raises(ValueError, match="outside the grid"):
        grid.nearest_index([1.5])


def test_scalar_field_is_frozen(grid):
    values = np.zeros(grid.shape)
    field = ScalarField(grid, values)
    values[3] = 1.0
    assert field.values[3] == 0.0
    with pytest.raises(ValueError):
        field.values[0] = 1.0


def test_scalar_field_rejects_bad_values(grid):
    with pytest.raises(ValueError, match="does not match"):
        ScalarField(grid, np.zeros(5))
    with pytest.raises(ValueError, match="finite"):
        ScalarField(grid, np.full(grid.shape, np.nan))


def test_scalar_field_grid_mismatch(grid):
    other = GridSpec.from_bounds([-1.0], [1.0], 0.05)
    with pytest.raises(ValueError, match="Grid mismatch"):
        ScalarField.zeros(grid) + ScalarField.zeros(other)


def test_cauchy_data_must_vanish_on_boundary(grid):
    u0 = np.zeros(grid.shape)
    u0[0] = 1.0
    with pytest.raises(ValueError, match="vanish on the boundary"):
        CauchyData.from_arrays(grid, u0, np.zeros(grid.shape))


def test_cauchy_data_arithmetic(grid):
    u0 = np.zeros(grid.shape)
    u0[5] = 2.0
    h = CauchyData.from_arrays(grid, u0, np.zeros(grid.shape))
    assert (h * 0.5).u0.values[5] == 1.0
    assert (h - h).is_zero()
    assert not h.is_zero()


def test_layered_profile_node_on_interface_takes_speed_beyond(grid):
    """
    Test that a node exactly on an interface belongs to the layer beyond it.
    """
    profile = LayeredProfile((0.0, 0.5), (1.0, 2.0, 0.5))
    medium = Medium.from_layers(grid, profile)
    x = grid.coordinates()[0]
    assert medium.c.values[np.argmin(np.abs(x))] == 2.0
    assert medium.c.values[np.argmin(np.abs(x - 0.5))] == 0.5
    assert medium.singular_support == (0.0, 0.5)


def test_layered_profile_validation():
    with pytest.raises(ValueError, match="needs 3 speeds"):
        LayeredProfile((0.0, 0.5), (1.0, 2.0))
    with pytest.raises(ValueError, match="strictly increasing"):
        LayeredProfile((0.5, 0.0), (1.0, 2.0, 3.0))


def test_layered_travel_time():
    profile = LayeredProfile((0.5, 1.0), (1.0, 2.0, 0.5))
    assert profile.travel_time(0.0, 1.2) == pytest.approx(0.5 + 0.25 + 0.4)
    assert profile.travel_time(1.2, 0.0) == pytest.approx(-1.15)


def test_mass_slowness_is_exact_cell_average(grid):
    profile = LayeredProfile((0.0,), (1.0, 2.0))
    medium = Medium.from_layers(grid, profile)
    x = grid.coordinates()[0]
    i = int(np.argmin(np.abs(x)))
    # Dual cell [−0.05, 0.05]: half at speed 1, half at speed 2.
    assert medium.mass_slowness()[i] == pytest.approx(0.5 * 1.0 + 0.5 * 0.25)


def test_medium_rejects_nonpositive_speed(grid):
    with pytest.raises(ValueError, match="positive"):
        Medium(ScalarField.constant(grid, 0.0))


def test_medium_rejects_inconsistent_layered_descriptor(grid):
    with pytest.raises(ValueError, match="rasterize"):
        Medium(ScalarField.constant(grid, 1.0), LayeredProfile((0.0,), (1.0, 2.0)))


def test_domain_nest_defaults_inner_domains(grid):
    nest = DomainNest.from_boxes(grid, {"theta": ([-0.5], [0.5])}, 0.3)
    assert np.array_equal(nest.omega, nest.theta)
    assert nest.theta.sum() == 11


def test_domain_nest_violations(grid):
    with pytest.raises(ValueError, match="Domain nesting violated"):
        DomainNest.from_boxes(grid, {"theta": ([-0.5], [0.5]), "omega": ([-0.8], [0.0])}, 0.3)
    with pytest.raises(ValueError, match="strictly inside"):
        DomainNest.from_boxes(grid, {"theta": ([-1.0], [0.5])}, 0.3)
    with pytest.raises(ValueError, match="positive"):
        DomainNest.from_boxes(grid, {"theta": ([-0.5], [0.5])}, 0.0)
