"""Ground-truth radio environment synthesis.

Received power at a location decomposes into a deterministic link budget
(transmit power plus free-space gain at the 3D link distance, minus the mean
shadowing loss), a zero-mean spatially correlated shadowing term whose
covariance halves every ``corr_distance`` meters of separation, and small-scale
fading that is independent from point to point. Measurements add white sensor
noise on top. All power quantities are dBm and all variances dB^2.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spatial import GridSpec, grid_points

__all__ = [
    "SPEED_OF_LIGHT",
    "Transmitter",
    "ChannelParams",
    "GroundTruth",
    "Measurement",
    "shadow_cov",
    "base_power",
    "base_powers",
    "grid_base_powers",
    "shadow_cov_matrix",
    "draw_transmitters",
    "sample_ground_truth",
    "true_power",
    "take_measurement",
]

SPEED_OF_LIGHT = 299_792_458.0

# Relative diagonal jitter applied before factorizing shadowing covariance
# matrices; dense grids make them numerically singular.
COV_JITTER = 1e-9


@dataclass(frozen=True)
class Transmitter:
    """A fixed transmitter: 3D position in meters, transmit power in dBm."""

    position: tuple[float, float, float]
    power_dbm: float

    def __post_init__(self) -> None:
        if len(self.position) != 3:
            raise ValueError("transmitter position must be a 3D point")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and sensing parameters shared by every transmitter."""

    transmitters: tuple[Transmitter, ...]
    frequency: float = 2.4e9
    pathloss_exponent: float = 2.0
    shadow_var: float = 9.0
    shadow_mean: float = 0.0
    corr_distance: float = 50.0
    fading_var: float = 0.0
    noise_var: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "transmitters", tuple(self.transmitters))
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not self.pathloss_exponent > 0:
            raise ValueError("pathloss_exponent must be positive")
        if not self.corr_distance > 0:
            raise ValueError("corr_distance must be positive")
        for name in ("shadow_var", "fading_var", "noise_var"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def num_transmitters(self) -> int:
        return len(self.transmitters)


def shadow_cov(distance, params: ChannelParams):
    """Shadowing covariance between two points ``distance`` meters apart.

    Exponentially decaying in the separation, reaching half the shadowing
    variance at ``corr_distance``.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    out = params.shadow_var * np.exp2(-d / params.corr_distance)
    return float(out) if out.ndim == 0 else out


def base_powers(
    points, tx: Transmitter, params: ChannelParams, altitude: float = 0.0
) -> np.ndarray:
    """Deterministic received-power component at each planar point (dBm).

    Free-space gain is evaluated at the 3D distance between the sensing
    altitude and the transmitter; path-loss exponents other than 2 scale the
    free-space loss proportionally.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    txx, txy, txz = tx.position
    d = np.sqrt((pts[:, 0] - txx) ** 2 + (pts[:, 1] - txy) ** 2 + (altitude - txz) ** 2)
    if np.any(d <= 0):
        raise ValueError("point coincides with the transmitter")
    gain = -10.0 * params.pathloss_exponent * np.log10(
        4.0 * np.pi * params.frequency * d / SPEED_OF_LIGHT
    )
    return tx.power_dbm + gain - params.shadow_mean


def base_power(
    point: Sequence[float], tx: Transmitter, params: ChannelParams, altitude: float = 0.0
) -> float:
    """Scalar form of :func:`base_powers` for a single point."""
    return float(base_powers(np.asarray(point, dtype=float)[None, :], tx, params, altitude)[0])


def grid_base_powers(grid: GridSpec, params: ChannelParams, tx: Transmitter) -> np.ndarray:
    return base_powers(grid_points(grid), tx, params, grid.altitude)


def shadow_cov_matrix(points, params: ChannelParams) -> np.ndarray:
    """Pairwise shadowing covariance matrix for an (M, 2) point set."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1))
    return params.shadow_var * np.exp2(-d / params.corr_distance)


def shadow_cross_cov(points_a, points_b, params: ChannelParams) -> np.ndarray:
    """Shadowing covariance between two point sets, shape (len(a), len(b))."""
    a = np.asarray(points_a, dtype=float).reshape(-1, 2)
    b = np.asarray(points_b, dtype=float).reshape(-1, 2)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    return params.shadow_var * np.exp2(-d / params.corr_distance)


@functools.lru_cache(maxsize=16)
def _shadow_chol(grid: GridSpec, shadow_var: float, corr_distance: float) -> np.ndarray:
    """Cholesky factor of the jittered grid shadowing covariance (cached)."""
    pts = grid_points(grid)
    diff = pts[:, None, :] - pts[None, :, :]
    cov = shadow_var * np.exp2(-np.sqrt((diff**2).sum(axis=-1)) / corr_distance)
    cov[np.diag_indices_from(cov)] += COV_JITTER * shadow_var
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "shadowing covariance factorization failed even after diagonal jitter"
        ) from exc
    factor.flags.writeable = False
    return factor


def draw_transmitters(
    grid: GridSpec,
    count: int,
    height: float,
    power_dbm: float,
    rng: np.random.Generator | int,
) -> tuple[Transmitter, ...]:
    """Place ``count`` transmitters uniformly at random over the grid rectangle."""
    if count < 1:
        raise ValueError("need at least one transmitter")
    gen = np.random.default_rng(rng)
    xmin, ymin, xmax, ymax = grid.bounds()
    out = []
    for _ in range(count):
        x = float(gen.uniform(xmin, xmax))
        y = float(gen.uniform(ymin, ymax))
        out.append(Transmitter(position=(x, y, height), power_dbm=power_dbm))
    return tuple(out)


@dataclass(frozen=True)
class GroundTruth:
    """True power values on the grid per transmitter; hidden from the estimator."""

    grid: GridSpec
    powers: np.ndarray  # (num_transmitters, num_points) dBm

    def power_at(self, point) -> np.ndarray:
        return true_power(self, point)


def sample_ground_truth(
    grid: GridSpec, params: ChannelParams, rng: np.random.Generator | int
) -> GroundTruth:
    """Draw one realization of the true power map for every transmitter.

    Shadowing is drawn through the factorized grid covariance and fading is
    added independently per point; both draws happen per transmitter, so the
    result is deterministic for a given seed.
    """
    if params.num_transmitters < 1:
        raise ValueError("need at least one transmitter")
    gen = np.random.default_rng(rng)
    n = grid.num_points
    powers = np.empty((params.num_transmitters, n))
    for k, tx in enumerate(params.transmitters):
        base = grid_base_powers(grid, params, tx)
        shadow_z = gen.standard_normal(n)
        if params.shadow_var > 0:
            shadow = _shadow_chol(grid, params.shadow_var, params.corr_distance) @ shadow_z
        else:
            shadow = np.zeros(n)
        fading = np.sqrt(params.fading_var) * gen.standard_normal(n)
        powers[k] = base - shadow + fading
    return GroundTruth(grid=grid, powers=powers)


def _catmull_rom_1d(p0, p1, p2, p3, u: float):
    # Horner form; u = 0 returns p1 exactly, so grid points reproduce exactly.
    return 0.5 * (
        2.0 * p1
        + u * ((p2 - p0) + u * ((2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) + u * (3.0 * (p1 - p2) + p3 - p0)))
    )


def _catmull_rom_2d(field: np.ndarray, fx: float, fy: float) -> float:
    """Separable cubic interpolation with border cells replicated outward."""
    rows, cols = field.shape
    c0 = min(int(np.floor(fx)), cols - 1)
    r0 = min(int(np.floor(fy)), rows - 1)
    u = fx - c0
    v = fy - r0
    cs = np.clip(np.arange(c0 - 1, c0 + 3), 0, cols - 1)
    rs = np.clip(np.arange(r0 - 1, r0 + 3), 0, rows - 1)
    patch = field[np.ix_(rs, cs)]
    rowvals = _catmull_rom_1d(patch[:, 0], patch[:, 1], patch[:, 2], patch[:, 3], u)
    return float(_catmull_rom_1d(rowvals[0], rowvals[1], rowvals[2], rowvals[3], v))


def true_power(gt: GroundTruth, point) -> np.ndarray:
    """True power at a planar point, one value per transmitter (dBm).

    Off-grid points are interpolated with a separable cubic spline over the
    grid values; on-grid points reproduce the stored values exactly.
    """
    grid = gt.grid
    x, y = float(point[0]), float(point[1])
    if not grid.contains(x, y):
        raise ValueError(f"point ({x}, {y}) lies outside the grid rectangle")
    ox, oy = grid.origin
    fx = float(np.clip((x - ox) / grid.spacing, 0.0, grid.cols - 1))
    fy = float(np.clip((y - oy) / grid.spacing, 0.0, grid.rows - 1))
    fields = gt.powers.reshape(-1, grid.rows, grid.cols)
    return np.array([_catmull_rom_2d(f, fx, fy) for f in fields])


@dataclass(frozen=True)
class Measurement:
    """One received-signal-strength sample: position plus per-transmitter dBm."""

    position: tuple[float, float]
    rss: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "rss", tuple(float(v) for v in self.rss))


def take_measurement(
    gt: GroundTruth, point, params: ChannelParams, rng: np.random.Generator | int
) -> Measurement:
    """Measure the true field at ``point`` with additive white sensor noise."""
    gen = np.random.default_rng(rng)
    noise = np.sqrt(params.noise_var) * gen.standard_normal(params.num_transmitters)
    rss = true_power(gt, point) + noise
    return Measurement(position=(float(point[0]), float(point[1])), rss=tuple(rss))
