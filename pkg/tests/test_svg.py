import numpy as np
import pytest

from utils.svg import heatmap, line_plot


def test_line_plot_series_and_labels():
    x = np.linspace(0.0, 1.0, 5)
    svg = line_plot({"a<b": (x, x**2), "flat": (x, np.ones_like(x))}, "profiles")
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 2
    assert "a&lt;b" in svg
    assert "profiles" in svg


def test_line_plot_log_drops_zeros():
    svg = line_plot({"decay": ([0, 1, 2], [1.0, 0.0, 1e-3])}, "decay", log_y=True)
    points = svg.split('points="')[1].split('"')[0].split()
    assert len(points) == 2
    assert "decay (log10)" in svg


def test_heatmap_downsamples():
    values = np.zeros((400, 10))
    values[0, 0] = 1.0
    values[396, -1] = -1.0
    svg = heatmap(values, "field", max_cells=100)
    assert svg.count("<rect") == 3  # background plus two cells
    assert "rgb(255,0,0)" in svg


def test_heatmap_needs_2d():
    with pytest.raises(ValueError, match="2D"):
        heatmap(np.zeros(4))
