"""
Initial data: directed pulses, tilted wave packets, Gaussian probes and smoothed random fields.
"""

from logging import getLogger
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from models.config import SourceConfig
from models.fields import CauchyData, GridSpec, Medium

logger = getLogger("sclab")

PULSE_CUTOFF = 6.0
PACKET_CUTOFF = 5.0

DIRECTION_SIGN = {"forward": -1.0, "backward": 1.0, "standing": 0.0}


def _local_speed(medium: Medium, center: Sequence[float]) -> float:
    return float(medium.c.values[medium.grid.nearest_index(center)])


def _finish(grid: GridSpec, u0: np.ndarray, u1: np.ndarray) -> CauchyData:
    boundary = grid.boundary_mask()
    u0 = np.where(boundary, 0.0, u0)
    u1 = np.where(boundary, 0.0, u1)
    return CauchyData.from_arrays(grid, u0, u1)


def directed_pulse(
    medium: Medium,
    center: float,
    width: float,
    direction: str = "forward",
    amplitude: float = 1.0,
) -> CauchyData:
    """
    1D Gaussian-derivative pulse of peak |u₀| = amplitude travelling right (forward), left (backward) or splitting (standing).

    Args:
        medium (Medium): 1D medium; the pulse uses the speed c at its centre.
        center (float): Pulse centre.
        width (float): Width in travel time; the spatial width is width·c.
        direction (str): "forward", "backward" or "standing".
        amplitude (float): Peak amplitude.

    Returns:
        CauchyData: The pulse, truncated at six widths.
    """
    grid = medium.grid
    if grid.dim != 1:
        raise ValueError("Directed pulses are one-dimensional; use a packet in 2D")
    if direction not in DIRECTION_SIGN:
        raise ValueError(f"Unknown pulse direction {direction!r}")
    c = _local_speed(medium, [center])
    sigma = width * c
    x = grid.coordinates()[0]
    s = (x - center) / sigma
    envelope = np.exp(-0.5 * s**2)
    cutoff = np.abs(s) <= PULSE_CUTOFF
    g = -amplitude * np.exp(0.5) * s * envelope
    dg = -amplitude * np.exp(0.5) * (1.0 - s**2) * envelope / sigma
    u0 = np.where(cutoff, g, 0.0)
    u1 = np.where(cutoff, DIRECTION_SIGN[direction] * c * dg, 0.0)
    return _finish(grid, u0, u1)


def gaussian_probe(medium: Medium, center: float, width: float, direction: str = "forward") -> CauchyData:
    """Rightward (or leftward) 1D Gaussian exp(−s²/2) used to probe the reflection response."""
    grid = medium.grid
    if grid.dim != 1:
        raise ValueError("Gaussian probes are one-dimensional")
    c = _local_speed(medium, [center])
    sigma = width * c
    x = grid.coordinates()[0]
    s = (x - center) / sigma
    g = np.exp(-0.5 * s**2)
    dg = -s * g / sigma
    cutoff = np.abs(s) <= PULSE_CUTOFF
    u0 = np.where(cutoff, g, 0.0)
    u1 = np.where(cutoff, DIRECTION_SIGN[direction] * c * dg, 0.0)
    return _finish(grid, u0, u1)


def wave_packet(
    medium: Medium,
    center: Sequence[float],
    width: float,
    period: float,
    angle_deg: float = 0.0,
    amplitude: float = 1.0,
) -> CauchyData:
    """
    Gaussian-windowed plane wave travelling along n = (sin θ, cos θ), θ measured from the depth axis.

    Args:
        medium (Medium): 1D or 2D medium (in 1D the sign of cos θ picks the direction).
        center (Sequence[float]): Packet centre.
        width (float): Envelope width in travel time.
        period (float): Temporal period of the carrier.
        angle_deg (float): Propagation angle from the last (depth) axis.
        amplitude (float): Peak amplitude.
    """
    grid = medium.grid
    c = _local_speed(medium, center)
    w = width * c
    k = 2.0 * np.pi / (period * c)
    theta = np.deg2rad(angle_deg)
    direction = np.array([np.sin(theta), np.cos(theta)]) if grid.dim == 2 else np.array([np.sign(np.cos(theta)) or 1.0])
    mesh = grid.mesh()
    offsets = [m - x0 for m, x0 in zip(mesh, center)]
    r2 = sum(o**2 for o in offsets)
    phase = k * sum(n * o for n, o in zip(direction, offsets))
    envelope = amplitude * np.exp(-0.5 * r2 / w**2)
    u0 = envelope * np.cos(phase)
    # u₁ = −c n·∇u₀
    grad_dot_n = sum(n * (-o / w**2) for n, o in zip(direction, offsets)) * u0 - envelope * k * np.sin(phase)
    u1 = -c * grad_dot_n
    cutoff = r2 <= (PACKET_CUTOFF * w) ** 2
    return _finish(grid, np.where(cutoff, u0, 0.0), np.where(cutoff, u1, 0.0))


def random_field_data(
    grid: GridSpec,
    rng: np.random.Generator,
    mask: np.ndarray | None = None,
    smoothing: float = 2.0,
) -> CauchyData:
    """Smoothed Gaussian noise in both components, optionally restricted to a mask."""
    u0 = gaussian_filter(rng.standard_normal(grid.shape), smoothing)
    u1 = gaussian_filter(rng.standard_normal(grid.shape), smoothing)
    if mask is not None:
        u0 = np.where(mask, u0, 0.0)
        u1 = np.where(mask, u1, 0.0)
    return _finish(grid, u0, u1)


def source_data(source: SourceConfig, medium: Medium) -> CauchyData:
    """Builds h₀ from a source config section."""
    grid = medium.grid
    if source.kind == "zero":
        return CauchyData.zeros(grid)
    if len(source.center) != grid.dim:
        raise ValueError(f"Source centre {source.center} does not match the {grid.dim}D grid")
    if source.kind == "pulse":
        if grid.dim != 1:
            raise ValueError("Pulse sources are one-dimensional; use kind 'packet' in 2D")
        h0 = directed_pulse(medium, source.center[0], source.width, source.direction, source.amplitude)
    else:
        period = source.period if source.period is not None else 2.0 * source.width
        h0 = wave_packet(medium, source.center, source.width, period, source.angle, source.amplitude)
    logger.info(f"Initial data: {source.kind} at {source.center} (width {source.width})")
    return h0
