"""
Travel-time depth d*_Θ by first-order fast marching, and the level sets Θ_t / Θ*_t built from it.
"""

import heapq
from dataclasses import dataclass
from logging import getLogger

import numpy as np

from models.fields import DomainNest, GridSpec, Medium, ScalarField

logger = getLogger("sclab")

LEVEL_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class DepthField:
    """
    Signed travel-time depth: +d(x, ∂Θ) inside Θ, −d(x, ∂Θ) outside.

    Attributes:
        d (ScalarField): Depth in time units.
        source (str): Name of the mask whose boundary it is measured from.
    """

    d: ScalarField
    source: str = "theta"

    @property
    def grid(self) -> GridSpec:
        return self.d.grid

    @property
    def values(self) -> np.ndarray:
        return self.d.values


def _neighbours(index: tuple[int, ...], shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    out = []
    for axis in range(len(shape)):
        for step in (-1, 1):
            j = index[axis] + step
            if 0 <= j < shape[axis]:
                n = list(index)
                n[axis] = j
                out.append(tuple(n))
    return out


def front_nodes(mask: np.ndarray) -> np.ndarray:
    """Nodes of the mask having a 4-neighbour (2-neighbour in 1D) outside it."""
    front = np.zeros_like(mask)
    for axis in range(mask.ndim):
        for step in (-1, 1):
            shifted = np.roll(mask, step, axis=axis)
            edge: list[slice | int] = [slice(None)] * mask.ndim
            edge[axis] = 0 if step == 1 else -1
            shifted[tuple(edge)] = True
            front |= mask & ~shifted
    return front


def _update(
    index: tuple[int, ...], arrival: np.ndarray, accepted: np.ndarray, slowness: np.ndarray, h: float
) -> float:
    """Upwind eikonal update of one node from its accepted neighbours."""
    shape = arrival.shape
    if len(shape) == 1:
        best = np.inf
        for n in _neighbours(index, shape):
            if accepted[n]:
                step = 0.5 * h * (slowness[index] + slowness[n])
                best = min(best, arrival[n] + step)
        return best
    upwind = []
    for axis in range(2):
        values = []
        for step in (-1, 1):
            j = index[axis] + step
            if 0 <= j < shape[axis]:
                n = list(index)
                n[axis] = j
                if accepted[tuple(n)]:
                    values.append(arrival[tuple(n)])
        if values:
            upwind.append(min(values))
    if not upwind:
        return np.inf
    f = slowness[index] * h
    if len(upwind) == 1:
        return upwind[0] + f
    a, b = sorted(upwind)
    if b - a >= f:
        return a + f
    return 0.5 * (a + b + np.sqrt(2 * f * f - (a - b) ** 2))


def fast_march(region: np.ndarray, seeds: np.ndarray, slowness: np.ndarray, h: float) -> np.ndarray:
    """
    Arrival times over `region` from `seeds` (time 0) with Dijkstra-ordered acceptance.
    Nodes outside the region stay at +inf.
    """
    arrival = np.full(region.shape, np.inf)
    accepted = np.zeros(region.shape, dtype=bool)
    heap: list[tuple[float, tuple[int, ...]]] = []
    for index in zip(*np.nonzero(seeds)):
        arrival[index] = 0.0
        heapq.heappush(heap, (0.0, tuple(int(i) for i in index)))
    while heap:
        time, index = heapq.heappop(heap)
        if accepted[index] or time > arrival[index]:
            continue
        accepted[index] = True
        for n in _neighbours(index, region.shape):
            if not region[n] or accepted[n]:
                continue
            candidate = _update(n, arrival, accepted, slowness, h)
            if candidate < arrival[n]:
                arrival[n] = candidate
                heapq.heappush(heap, (candidate, n))
    return arrival


def compute_depth(nest: DomainNest, medium: Medium, source: str = "theta") -> DepthField:
    """
    Signed depth d*_Θ from the boundary nodes of a nest mask.

    Inside and outside are marched separately from the boundary layer of the mask (depth 0),
    so the outside march never crosses Θ.

    Args:
        nest (DomainNest): Domain masks.
        medium (Medium): Wave speed; the march uses its slowness 1/c.
        source (str): Which mask's boundary to measure from.

    Returns:
        DepthField: Signed depth.
    """
    if medium.grid != nest.grid:
        raise ValueError("Medium and domain nest live on different grids")
    mask = getattr(nest, source)
    return depth_from_mask(mask, medium, source)


def depth_from_mask(mask: np.ndarray, medium: Medium, source: str = "mask") -> DepthField:
    if not np.all(medium.c.values > 0):
        raise ValueError("Wave speed must be positive everywhere")
    grid = medium.grid
    slowness = 1.0 / medium.c.values
    seeds = front_nodes(mask)
    inside = fast_march(mask, seeds, slowness, grid.spacing)
    outside_region = ~mask | seeds
    outside = fast_march(outside_region, seeds, slowness, grid.spacing)
    d = np.where(mask, inside, -outside)
    d[~np.isfinite(d)] = -np.inf
    if np.isneginf(d).any():
        logger.warning("Some nodes are unreachable from the boundary of the mask")
    logger.debug(f"Depth computed from {int(seeds.sum())} boundary nodes")
    return DepthField(ScalarField(grid, np.nan_to_num(d, neginf=-1e300)), source)


def level_mask(depth: DepthField, t: float, side: str = "inside") -> np.ndarray:
    """
    Θ_t = {d ≥ t} (ties included) or its complement Θ*_t.

    Args:
        depth (DepthField): Signed depth.
        t (float): Level.
        side (str): "inside" or "outside".
    """
    inside = depth.values >= t - LEVEL_TOLERANCE
    if side == "inside":
        return inside
    if side == "outside":
        return ~inside
    raise ValueError(f"Unknown side {side!r}; expected 'inside' or 'outside'")


def boundary_margin(depth: DepthField) -> float:
    """Travel-time distance d(∂Υ, Θ̄): the smallest −d over the boundary nodes of Υ."""
    return float(np.min(-depth.values[depth.grid.boundary_mask()]))


def travel_time_from(mask: np.ndarray, medium: Medium) -> ScalarField:
    """Unsigned travel time from the nodes of `mask` through the whole grid."""
    grid = medium.grid
    region = np.ones(grid.shape, dtype=bool)
    arrival = fast_march(region, mask, 1.0 / medium.c.values, grid.spacing)
    return ScalarField(grid, np.nan_to_num(arrival, posinf=1e300))
