"""Waypoint planners: uncertainty-driven shortest-path routing plus sweep and random baselines."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import convolve2d

from .spatial import GridSpec, MotionGraph, Waypoint, index_to_point, point_to_index
from .uncertainty import UncertaintyField

__all__ = [
    "EDGE_FLOOR",
    "PlannerKind",
    "PlanRequest",
    "pick_destination",
    "min_cost_route",
    "grid_route",
    "spiral_route",
    "random_route",
]

# Lower bound on the per-edge uncertainty line integral before taking the
# reciprocal; zero-uncertainty edges stay traversable at a large finite cost.
EDGE_FLOOR = 1e-6


class PlannerKind(str, Enum):
    MIN_COST = "min_cost"
    GRID = "grid"
    SPIRAL = "spiral"
    RANDOM = "random"


@dataclass
class PlanRequest:
    """Inputs a planner may consult when producing the next route."""

    current_position: Waypoint
    uncertainty: UncertaintyField | np.ndarray | None
    grid: GridSpec
    graph: MotionGraph | None = None
    rng: np.random.Generator | None = None


def pick_destination(uncertainty, grid: GridSpec, exclude: int | None = None) -> int:
    """Grid index maximizing the 3x3 box-filtered uncertainty.

    Cells outside the grid count as zero in the filter. Ties break toward the
    lowest linear index; ``exclude`` removes one candidate (used to avoid
    replanning to the point the agent already occupies).
    """
    vals = np.asarray(getattr(uncertainty, "values", uncertainty), dtype=float)
    if vals.size != grid.num_points:
        raise ValueError("uncertainty field does not match the grid")
    field = vals.reshape(grid.rows, grid.cols)
    filtered = convolve2d(field, np.ones((3, 3)), mode="same", boundary="fill", fillvalue=0.0)
    flat = filtered.ravel()
    if exclude is not None and flat.size > 1:
        flat = flat.copy()
        flat[exclude] = -np.inf
    return int(np.argmax(flat))


def _edge_length(grid: GridSpec, i: int, j: int) -> float:
    ri, ci = divmod(i, grid.cols)
    rj, cj = divmod(j, grid.cols)
    return grid.spacing * float(np.hypot(ri - rj, ci - cj))


def _edge_cost(u: np.ndarray, grid: GridSpec, i: int, j: int) -> float:
    integral = _edge_length(grid, i, j) * 0.5 * (u[i] + u[j])
    return 1.0 / max(integral, EDGE_FLOOR)


def _reconstruct(prev: dict[int, int], src: int, dst: int) -> list[int]:
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _dijkstra(grid: GridSpec, graph: MotionGraph, u: np.ndarray, src: int, dst: int) -> list[int]:
    dist = {src: 0.0}
    prev: dict[int, int] = {}
    done: set[int] = set()
    heap = [(0.0, src)]
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        if node == dst:
            return _reconstruct(prev, src, dst)
        done.add(node)
        for nb in graph.neighbors[node]:
            if nb in done:
                continue
            nd = d + _edge_cost(u, grid, node, nb)
            if nd < dist.get(nb, np.inf):
                dist[nb] = nd
                prev[nb] = node
                heapq.heappush(heap, (nd, nb))
    raise RuntimeError("destination unreachable in motion graph")


def _bellman_ford(grid: GridSpec, graph: MotionGraph, u: np.ndarray, src: int, dst: int) -> list[int]:
    n = grid.num_points
    dist = np.full(n, np.inf)
    dist[src] = 0.0
    prev: dict[int, int] = {}
    for _ in range(n - 1):
        changed = False
        for i in range(n):
            di = dist[i]
            if not np.isfinite(di):
                continue
            for j in graph.neighbors[i]:
                nd = di + _edge_cost(u, grid, i, j)
                if nd < dist[j]:
                    dist[j] = nd
                    prev[j] = i
                    changed = True
        if not changed:
            break
    if not np.isfinite(dist[dst]):
        raise RuntimeError("destination unreachable in motion graph")
    return _reconstruct(prev, src, dst)


def min_cost_route(request: PlanRequest, destination: int, engine: str = "dijkstra") -> list[Waypoint]:
    """Cheapest king-move walk from the nearest grid point to ``destination``.

    Each edge costs the reciprocal of the trapezoidal uncertainty line
    integral along it (floored at EDGE_FLOOR), so routes gravitate toward
    high-uncertainty terrain. Dijkstra is the default; ``engine="bellman_ford"``
    runs the edge-relaxation variant, which returns an equal-cost (not
    necessarily identical) path.
    """
    if request.graph is None:
        raise ValueError("min-cost routing needs a motion graph")
    grid = request.grid
    if not 0 <= destination < grid.num_points:
        raise IndexError(f"destination {destination} out of range [0, {grid.num_points})")
    u = np.asarray(getattr(request.uncertainty, "values", request.uncertainty), dtype=float)
    if u.size != grid.num_points:
        raise ValueError("uncertainty field does not match the grid")
    src = point_to_index(grid, (request.current_position.x, request.current_position.y))
    if src == destination:
        return [Waypoint(*index_to_point(grid, src))]
    if engine == "dijkstra":
        path = _dijkstra(grid, request.graph, u, src, destination)
    elif engine == "bellman_ford":
        path = _bellman_ford(grid, request.graph, u, src, destination)
    else:
        raise ValueError(f"unknown routing engine: {engine!r}")
    return [Waypoint(*index_to_point(grid, g)) for g in path]


def route_cost(grid: GridSpec, u, waypoints: list[Waypoint]) -> float:
    """Total reciprocal-integral cost of a grid-point waypoint sequence."""
    vals = np.asarray(getattr(u, "values", u), dtype=float)
    total = 0.0
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        i = point_to_index(grid, (a.x, a.y))
        j = point_to_index(grid, (b.x, b.y))
        total += _edge_cost(vals, grid, i, j)
    return total


def grid_route(grid: GridSpec) -> list[Waypoint]:
    """Boustrophedon sweep: every row end-to-end, alternating direction."""
    wps: list[Waypoint] = []
    for r in range(grid.rows):
        cols = (0, grid.cols - 1) if r % 2 == 0 else (grid.cols - 1, 0)
        for c in cols:
            p = index_to_point(grid, r * grid.cols + c)
            wp = Waypoint(p[0], p[1])
            if not wps or wps[-1] != wp:
                wps.append(wp)
    return wps


def spiral_route(grid: GridSpec) -> list[Waypoint]:
    """Inward rectangular spiral over the grid starting at the origin corner.

    Each perimeter ring is flown once (first along the low row, then the high
    column, high row, and back down the low column), then the next ring in.
    """
    wps: list[Waypoint] = []

    def emit(r: int, c: int) -> None:
        p = index_to_point(grid, r * grid.cols + c)
        wp = Waypoint(p[0], p[1])
        if not wps or wps[-1] != wp:
            wps.append(wp)

    r_lo, r_hi = 0, grid.rows - 1
    c_lo, c_hi = 0, grid.cols - 1
    emit(r_lo, c_lo)
    while r_lo <= r_hi and c_lo <= c_hi:
        if r_lo == r_hi and c_lo == c_hi:
            break
        if r_lo == r_hi:
            emit(r_lo, c_hi)
            break
        if c_lo == c_hi:
            emit(r_hi, c_lo)
            break
        emit(r_lo, c_hi)
        emit(r_hi, c_hi)
        emit(r_hi, c_lo)
        if r_lo + 1 < r_hi:
            emit(r_lo + 1, c_lo)  # stop short of closing the ring
        r_lo += 1
        r_hi -= 1
        c_lo += 1
        c_hi -= 1
        if r_lo <= r_hi and c_lo <= c_hi:
            emit(r_lo, c_lo)
    return wps


def random_route(request: PlanRequest) -> list[Waypoint]:
    """Straight segment from the current position to a uniform random grid point."""
    if request.rng is None:
        raise ValueError("random planner needs an rng")
    g = int(request.rng.integers(request.grid.num_points))
    p = index_to_point(request.grid, g)
    dest = Waypoint(p[0], p[1])
    if (request.current_position.x, request.current_position.y) == (dest.x, dest.y):
        return [dest]
    return [request.current_position, dest]
