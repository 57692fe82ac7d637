"""
Minimal SVG plots: line charts (wave-field profiles, convergence curves, depth diagrams) and heatmaps.
"""

from html import escape
from typing import Mapping, Sequence

import numpy as np

WIDTH = 640
HEIGHT = 400
MARGIN = 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _scale(values: np.ndarray, lo: float, hi: float, a: float, b: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return a + (values - lo) * (b - a) / span


def _finite_range(arrays: Sequence[np.ndarray]) -> tuple[float, float]:
    finite = [a[np.isfinite(a)] for a in arrays]
    finite = [a for a in finite if a.size]
    if not finite:
        return 0.0, 1.0
    lo = float(min(a.min() for a in finite))
    hi = float(max(a.max() for a in finite))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _frame(title: str, body: list[str], x_range: tuple[float, float], y_range: tuple[float, float]) -> str:
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = HEIGHT - MARGIN, MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{MARGIN / 2:.1f}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0}" y="{y0 + 16}" font-size="10">{x_range[0]:.3g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" font-size="10" text-anchor="end">{x_range[1]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" font-size="10" text-anchor="end">{y_range[0]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 10}" font-size="10" text-anchor="end">{y_range[1]:.3g}</text>',
    ]
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_plot(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    log_y: bool = False,
) -> str:
    """
    Polylines of named (x, y) series on shared axes.

    Args:
        series (Mapping): Label → (x values, y values).
        title (str): Plot title.
        log_y (bool): Plot log10|y| (zeros dropped).

    Returns:
        str: The SVG document.
    """
    prepared = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if log_y:
            keep = np.abs(y) > 0
            x, y = x[keep], np.log10(np.abs(y[keep]))
        prepared[label] = (x, y)
    x_range = _finite_range([x for x, _ in prepared.values()])
    y_range = _finite_range([y for _, y in prepared.values()])
    body = []
    for n, (label, (x, y)) in enumerate(prepared.items()):
        color = PALETTE[n % len(PALETTE)]
        keep = np.isfinite(x) & np.isfinite(y)
        px = _scale(x[keep], *x_range, MARGIN, WIDTH - MARGIN)
        py = _scale(y[keep], *y_range, HEIGHT - MARGIN, MARGIN)
        points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>')
        body.append(
            f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 14 * (n + 1)}" font-size="11" '
            f'text-anchor="end" fill="{color}">{escape(label)}</text>'
        )
    if log_y:
        title = f"{title} (log10)" if title else "log10"
    return _frame(title, body, x_range, y_range)


def heatmap(values: np.ndarray, title: str = "", max_cells: int = 160) -> str:
    """
    Diverging red/blue heatmap of a 2D array (first axis horizontal), downsampled to at most max_cells per axis.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"Heatmaps need a 2D array, got shape {values.shape}")
    stride = tuple(max(1, int(np.ceil(n / max_cells))) for n in values.shape)
    sampled = values[:: stride[0], :: stride[1]]
    peak = float(np.max(np.abs(sampled))) or 1.0
    nx, ny = sampled.shape
    cw = (WIDTH - 2 * MARGIN) / nx
    ch = (HEIGHT - 2 * MARGIN) / ny
    body = []
    for i in range(nx):
        for j in range(ny):
            level = sampled[i, j] / peak
            if abs(level) < 1e-3:
                continue
            shade = int(255 * (1 - min(abs(level), 1.0)))
            color = f"rgb(255,{shade},{shade})" if level > 0 else f"rgb({shade},{shade},255)"
            body.append(
                f'<rect x="{MARGIN + i * cw:.2f}" y="{MARGIN + j * ch:.2f}" '
                f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="{color}"/>'
            )
    return _frame(title, body, (0.0, float(values.shape[0])), (float(values.shape[1]), 0.0))
