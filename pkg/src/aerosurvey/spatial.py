"""Survey grid geometry, 8-connected motion graph, and arc-length path sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "Waypoint",
    "MotionGraph",
    "index_to_point",
    "point_to_index",
    "grid_points",
    "build_motion_graph",
    "sample_path",
    "travel_time",
]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of ``rows x cols`` points spaced ``spacing`` meters apart.

    Indices are row-major: index ``g`` sits at column ``g % cols`` and row
    ``g // cols``, with columns running along +x and rows along +y from
    ``origin``. ``altitude`` is the sensing height above ground and only
    enters 3D link distances.
    """

    rows: int
    cols: int
    spacing: float
    origin: tuple[float, float] = (0.0, 0.0)
    altitude: float = 0.0

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.altitude < 0:
            raise ValueError("altitude must be nonnegative")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def num_points(self) -> int:
        return self.rows * self.cols

    def bounds(self) -> tuple[float, float, float, float]:
        """Bounding rectangle as (xmin, ymin, xmax, ymax)."""
        ox, oy = self.origin
        return (
            ox,
            oy,
            ox + (self.cols - 1) * self.spacing,
            oy + (self.rows - 1) * self.spacing,
        )

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        xmin, ymin, xmax, ymax = self.bounds()
        return (xmin - tol) <= x <= (xmax + tol) and (ymin - tol) <= y <= (ymax + tol)


@dataclass(frozen=True)
class Waypoint:
    """One corner of a flight polyline, in meters."""

    x: float
    y: float


def index_to_point(grid: GridSpec, g: int) -> np.ndarray:
    """Planar coordinates of grid index ``g``."""
    if not 0 <= g < grid.num_points:
        raise IndexError(f"grid index {g} out of range [0, {grid.num_points})")
    row, col = divmod(int(g), grid.cols)
    ox, oy = grid.origin
    return np.array([ox + col * grid.spacing, oy + row * grid.spacing])


def point_to_index(grid: GridSpec, point: Sequence[float]) -> int:
    """Index of the grid point nearest ``point``; exact inverse of index_to_point."""
    x, y = float(point[0]), float(point[1])
    ox, oy = grid.origin
    col = min(max(int(round((x - ox) / grid.spacing)), 0), grid.cols - 1)
    row = min(max(int(round((y - oy) / grid.spacing)), 0), grid.rows - 1)
    return row * grid.cols + col


def grid_points(grid: GridSpec) -> np.ndarray:
    """All grid coordinates as an (N, 2) array in index order."""
    ox, oy = grid.origin
    xs = ox + np.arange(grid.cols) * grid.spacing
    ys = oy + np.arange(grid.rows) * grid.spacing
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class MotionGraph:
    """King-move adjacency over grid indices (up to 8 neighbors per node)."""

    neighbors: tuple[tuple[int, ...], ...]

    def degree(self, g: int) -> int:
        return len(self.neighbors[g])


_KING_MOVES = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def build_motion_graph(grid: GridSpec) -> MotionGraph:
    """Adjacency lists for single-cell horizontal, vertical, and diagonal moves."""
    if grid.rows < 2 or grid.cols < 2:
        raise ValueError("motion graph needs at least a 2x2 grid")
    neighbors = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            adj = []
            for dr, dc in _KING_MOVES:
                rr, cc = r + dr, c + dc
                if 0 <= rr < grid.rows and 0 <= cc < grid.cols:
                    adj.append(rr * grid.cols + cc)
            neighbors.append(tuple(adj))
    return MotionGraph(neighbors=tuple(neighbors))


def as_coords(waypoints: Iterable[Waypoint] | np.ndarray) -> np.ndarray:
    """Coerce a waypoint sequence (Waypoint, pair, or array rows) to an (M, 2) array."""
    if isinstance(waypoints, np.ndarray):
        arr = np.asarray(waypoints, dtype=float)
        return arr.reshape(-1, 2)
    rows = []
    for w in waypoints:
        if isinstance(w, Waypoint):
            rows.append((w.x, w.y))
        else:
            rows.append((float(w[0]), float(w[1])))
    return np.asarray(rows, dtype=float).reshape(-1, 2)


def sample_path(waypoints: Iterable[Waypoint] | np.ndarray, delta: float) -> np.ndarray:
    """Points every ``delta`` meters of arc length along a polyline.

    The first sample sits on the first waypoint and the sampling phase carries
    across segment joints, so consecutive samples are exactly ``delta`` apart
    along the path. The final waypoint is included only when the total length
    is a multiple of ``delta``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = as_coords(waypoints)
    if pts.shape[0] == 0:
        raise ValueError("need at least one waypoint")
    samples = [pts[0]]
    need = delta
    for a, b in zip(pts[:-1], pts[1:]):
        seg = b - a
        length = float(np.hypot(seg[0], seg[1]))
        if length == 0.0:
            continue
        direction = seg / length
        walked = 0.0
        while need <= length - walked:
            walked += need
            samples.append(a + direction * walked)
            need = delta
        need -= length - walked
    return np.asarray(samples)


def travel_time(waypoints: Iterable[Waypoint] | np.ndarray, speed: float) -> float:
    """Seconds to fly the polyline at constant ``speed``."""
    if not speed > 0:
        raise ValueError("speed must be positive")
    pts = as_coords(waypoints)
    if pts.shape[0] < 2:
        return 0.0
    deltas = np.diff(pts, axis=0)
    return float(np.hypot(deltas[:, 0], deltas[:, 1]).sum() / speed)
