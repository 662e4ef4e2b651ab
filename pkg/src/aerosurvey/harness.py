"""Survey execution and Monte Carlo benchmarking.

A survey flies a continuous polyline assembled from planner episodes, takes a
measurement every fixed number of meters along it (the sampling phase carries
across route joints, so every planner pays the same travel distance per
measurement), updates the per-transmitter posteriors online, and logs metrics
after each measurement. Monte Carlo repeats the survey over independent
environment realizations and aggregates the metric curves per measurement
index.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel, estimator, planner, spatial
from . import uncertainty as unc

__all__ = [
    "SurveyConfig",
    "MetricsRow",
    "Snapshot",
    "SurveyRecord",
    "MonteCarloResult",
    "service_error_rate",
    "run_survey",
    "monte_carlo",
]

THREADS_ENV = "AEROSURVEY_THREADS"


@dataclass(frozen=True)
class SurveyConfig:
    """Everything needed to reproduce one survey run."""

    grid: spatial.GridSpec
    channel: channel.ChannelParams  # empty transmitters -> drawn per run
    num_transmitters: int = 2
    tx_height: float = 10.0
    tx_power_dbm: float = 10.0
    r_min: float = -65.0
    measurement_spacing: float = 5.0
    planner: planner.PlannerKind = planner.PlannerKind.MIN_COST
    aggregation: str = "max"
    target: str = "service"
    max_measurements: int | None = 300
    uncertainty_threshold: float | None = None
    speed: float = 5.0
    start_position: spatial.Waypoint = spatial.Waypoint(0.0, 0.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.measurement_spacing > 0:
            raise ValueError("measurement_spacing must be positive")
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        if self.max_measurements is None and self.uncertainty_threshold is None:
            raise ValueError("set max_measurements and/or uncertainty_threshold")
        if self.max_measurements is not None and self.max_measurements < 0:
            raise ValueError("max_measurements must be nonnegative")
        if self.aggregation not in ("max", "mean"):
            raise ValueError(f"unknown aggregation: {self.aggregation!r}")
        if self.target not in ("power", "service"):
            raise ValueError(f"unknown target: {self.target!r}")
        if not self.channel.transmitters and self.num_transmitters < 1:
            raise ValueError("need at least one transmitter")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not self.grid.contains(self.start_position.x, self.start_position.y):
            raise ValueError("start_position lies outside the grid rectangle")
        object.__setattr__(self, "planner", planner.PlannerKind(self.planner))


@dataclass(frozen=True)
class MetricsRow:
    """Metrics logged after incorporating measurement ``t``."""

    run_id: int
    t: int
    meters: float
    total_unc_power: float
    total_unc_service: float
    service_error_rate: float


@dataclass
class Snapshot:
    """Grid fields captured just before measurement ``t`` was incorporated."""

    t: int
    posterior_means: np.ndarray  # (K, N) dBm
    service_prob: np.ndarray  # (K, N)
    power_unc: np.ndarray  # (N,) aggregated
    service_unc: np.ndarray  # (N,) aggregated


@dataclass
class SurveyRecord:
    """Full trace of one survey run."""

    config: SurveyConfig
    params: channel.ChannelParams
    ground_truth: channel.GroundTruth
    measurements: list[channel.Measurement]
    waypoints: list[spatial.Waypoint]
    metrics: list[MetricsRow]
    posteriors: list[estimator.PosteriorState]
    snapshots: dict[int, Snapshot] = field(default_factory=dict)


def service_error_rate(probabilities, gt: channel.GroundTruth, r_min: float) -> float:
    """Fraction of grid points whose thresholded service estimate disagrees with truth.

    With several transmitters a point counts as served when any transmitter
    serves it, on both the estimated map (probability >= 1/2) and the true map.
    """
    p = np.atleast_2d(np.asarray(probabilities, dtype=float))
    truth = np.any(gt.powers >= r_min, axis=0)
    if p.shape[1] != truth.shape[0]:
        raise ValueError("probability vector length does not match the grid")
    estimated = np.any(p >= 0.5, axis=0)
    return float(np.mean(estimated != truth))


def _power_fields(states, params) -> list[unc.UncertaintyField]:
    if params.shadow_var + params.fading_var <= 0:
        # Degenerate prior: the map is known exactly, nothing is uncertain.
        n = states[0].mean.shape[0]
        return [unc.UncertaintyField(np.zeros(n), "power") for _ in states]
    return [unc.power_uncertainty(s, params) for s in states]


def run_survey(config: SurveyConfig, run_id: int = 0, snapshots=()) -> SurveyRecord:
    """Run one survey to its stop criterion.

    Deterministic given ``(config.seed, run_id)``. ``snapshots`` lists
    measurement indices whose pre-update posterior fields should be captured;
    index 0 therefore captures the prior.
    """
    rng = np.random.default_rng([config.seed, run_id])
    grid = config.grid
    if config.channel.transmitters:
        params = config.channel
    else:
        txs = channel.draw_transmitters(
            grid, config.num_transmitters, config.tx_height, config.tx_power_dbm, rng
        )
        params = replace(config.channel, transmitters=txs)
    num_tx = params.num_transmitters
    gt = channel.sample_ground_truth(grid, params, rng)
    graph = (
        spatial.build_motion_graph(grid) if grid.rows >= 2 and grid.cols >= 2 else None
    )
    states = [estimator.init_posterior(grid, params, k) for k in range(num_tx)]
    delta = config.measurement_spacing
    wanted = set(int(s) for s in snapshots)
    record = SurveyRecord(
        config=config,
        params=params,
        ground_truth=gt,
        measurements=[],
        waypoints=[config.start_position],
        metrics=[],
        posteriors=states,
        snapshots={},
    )

    def capture(t: int) -> None:
        probs = [estimator.service_probability(s, config.r_min) for s in states]
        record.snapshots[t] = Snapshot(
            t=t,
            posterior_means=np.vstack([s.mean for s in states]),
            service_prob=np.vstack(probs),
            power_unc=unc.aggregate(_power_fields(states, params), config.aggregation).values,
            service_unc=unc.aggregate(
                [unc.service_uncertainty(p) for p in probs], config.aggregation
            ).values,
        )

    def planning_field() -> unc.UncertaintyField:
        if config.target == "power":
            fields = _power_fields(states, params)
        else:
            fields = [
                unc.service_uncertainty(estimator.service_probability(s, config.r_min))
                for s in states
            ]
        return unc.aggregate(fields, config.aggregation)

    def measure_at(point, t: int, meters: float) -> bool:
        """Snapshot, measure, update, log; returns True when the run should stop."""
        if t in wanted:
            capture(t)
        m = channel.take_measurement(gt, point, params, rng)
        for k in range(num_tx):
            coeffs = estimator.observation_coefficients(grid, params, k, point)
            states[k] = estimator.online_update(states[k], coeffs, m.rss[k])
        probs = [estimator.service_probability(s, config.r_min) for s in states]
        power_total = unc.total_uncertainty(
            unc.aggregate(_power_fields(states, params), config.aggregation)
        )
        service_total = unc.total_uncertainty(
            unc.aggregate([unc.service_uncertainty(p) for p in probs], config.aggregation)
        )
        record.measurements.append(m)
        record.metrics.append(
            MetricsRow(
                run_id=run_id,
                t=t,
                meters=meters,
                total_unc_power=power_total,
                total_unc_service=service_total,
                service_error_rate=service_error_rate(np.vstack(probs), gt, config.r_min),
            )
        )
        if config.max_measurements is not None and t >= config.max_measurements:
            return True
        if config.uncertainty_threshold is not None:
            target_total = power_total if config.target == "power" else service_total
            if target_total <= config.uncertainty_threshold:
                return True
        return False

    pos = np.array([config.start_position.x, config.start_position.y])
    t = 0
    arc = 0.0
    stop = measure_at(pos, t, arc)

    if grid.num_points == 1:
        # Nowhere to fly; keep sampling in place until the budget runs out.
        if config.max_measurements is None:
            raise RuntimeError("cannot make progress on a single-point grid without a budget")
        while not stop:
            t += 1
            stop = measure_at(pos, t, arc)
        record.posteriors = states
        return record

    sweep: list[spatial.Waypoint] | None = None
    if config.planner in (planner.PlannerKind.GRID, planner.PlannerKind.SPIRAL):
        sweep = (
            planner.grid_route(grid)
            if config.planner is planner.PlannerKind.GRID
            else planner.spiral_route(grid)
        )

    def plan_episode() -> list[spatial.Waypoint]:
        here = spatial.Waypoint(float(pos[0]), float(pos[1]))
        if sweep is not None:
            route = list(sweep)
        elif config.planner is planner.PlannerKind.RANDOM:
            route = planner.random_route(
                planner.PlanRequest(here, None, grid, graph, rng)
            )
        else:
            field_now = planning_field()
            current_idx = spatial.point_to_index(grid, pos)
            dest = planner.pick_destination(field_now, grid)
            if dest == current_idx:
                dest = planner.pick_destination(field_now, grid, exclude=current_idx)
            route = planner.min_cost_route(
                planner.PlanRequest(here, field_now, grid, graph, rng), dest
            )
        if route and (route[0].x, route[0].y) != (here.x, here.y):
            route = [here] + route
        return route

    need = delta  # arc length left until the next measurement
    stalls = 0
    while not stop:
        route = plan_episode()
        coords = spatial.as_coords(route)
        moved = False
        for i in range(len(route) - 1):
            a, b = coords[i], coords[i + 1]
            seg = b - a
            length = float(np.hypot(seg[0], seg[1]))
            if length == 0.0:
                continue
            moved = True
            direction = seg / length
            walked = 0.0
            while need <= length - walked:
                walked += need
                arc += need
                need = delta
                point = a + direction * walked
                t += 1
                stop = measure_at(point, t, arc)
                if stop:
                    # The run ends here; close the polyline at the last sample.
                    record.waypoints.append(spatial.Waypoint(float(point[0]), float(point[1])))
                    break
            if stop:
                break
            leftover = length - walked
            need -= leftover
            arc += leftover
            record.waypoints.append(route[i + 1])
        if stop:
            break
        if moved:
            stalls = 0
        else:
            stalls += 1
            if stalls > 10_000:
                raise RuntimeError("planner made no progress for 10000 consecutive episodes")
        pos = coords[-1]

    record.posteriors = states
    return record


@dataclass
class MonteCarloResult:
    """Per-measurement-index metric statistics over independent runs."""

    planner: planner.PlannerKind
    runs: int
    t: np.ndarray
    mean_meters: np.ndarray
    std_meters: np.ndarray
    mean_total_unc_power: np.ndarray
    std_total_unc_power: np.ndarray
    mean_total_unc_service: np.ndarray
    std_total_unc_service: np.ndarray
    mean_service_error_rate: np.ndarray
    std_service_error_rate: np.ndarray


def _resolve_workers(workers: int | None, runs: int) -> int:
    if workers is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        auto = os.cpu_count() or 1
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
            workers = auto if requested == 0 else min(requested, auto)
        else:
            workers = auto
    return max(1, min(int(workers), runs))


def monte_carlo(config: SurveyConfig, runs: int, workers: int | None = None) -> MonteCarloResult:
    """Aggregate survey metrics over ``runs`` independent environment realizations.

    Run ``k`` draws its transmitters and shadowing from a stream derived from
    ``(config.seed, k)``, so results are independent of execution order and of
    the worker count. The env var AEROSURVEY_THREADS caps parallelism (0 = auto).
    """
    if runs < 1:
        raise ValueError("need at least one run")
    nworkers = _resolve_workers(workers, runs)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            records = list(pool.map(lambda k: run_survey(config, run_id=k), range(runs)))
    else:
        records = [run_survey(config, run_id=k) for k in range(runs)]
    horizon = min(len(r.metrics) for r in records)

    def stack(name: str) -> np.ndarray:
        return np.array(
            [[getattr(row, name) for row in rec.metrics[:horizon]] for rec in records]
        )

    out = {"t": np.arange(horizon)}
    for name in ("meters", "total_unc_power", "total_unc_service", "service_error_rate"):
        data = stack(name)
        out[f"mean_{name}"] = data.mean(axis=0)
        out[f"std_{name}"] = data.std(axis=0)
    return MonteCarloResult(planner=config.planner, runs=runs, **out)
