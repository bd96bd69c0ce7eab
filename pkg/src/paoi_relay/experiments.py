"""
experiment harness: straight-line baseline, parameter sweeps and result files.

a sweep solves the joint problem once per parameter value (optionally also
the allocation-only problem on the straight path) in a process pool and
writes one CSV row per point, a summary.json and per-point trajectories.
"""
import csv
import dataclasses
import enum
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import bcd
from .constants import AOI_CURVE_HEADER, SWEEP_HEADER, TRAJECTORY_HEADER, WORKERS_ENV
from .errors import ConfigError, InfeasibleError, InvalidScenarioError, PaoiError
from .model import Allocation, Phase, Trajectory, aoi_curve, theta_sequence

logger = logging.getLogger(__name__)


class SweepParameter(str, enum.Enum):
    E_SOURCE = 'e_source'
    E_BOTH = 'e_both'
    PACKET_SIZE = 'packet_size'

    def apply(self, scn, value):
        """scenario with this parameter set to value (joules, or bits for packet_size)."""
        if self is SweepParameter.E_SOURCE:
            return scn.replace(e_source_j=value)
        if self is SweepParameter.E_BOTH:
            return scn.replace(e_source_j=value, e_uav_j=value)
        return scn.replace(packet_size_bits=value)


@dataclass(frozen=True)
class SweepSpec:
    """
    what to sweep and what to write.

    attributes:
        parameter (SweepParameter): the scenario field being varied.
        values (tuple): strictly increasing values to run.
        baseline (bool): also solve the allocation on the straight path.
        out_dir (str | None): where result files go; None keeps results in memory.
    """
    parameter: SweepParameter
    values: tuple
    baseline: bool = False
    out_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'parameter', SweepParameter(self.parameter))
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidScenarioError("a sweep needs at least one value")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidScenarioError(f"sweep values must be strictly increasing, got {values}")
        object.__setattr__(self, 'values', values)


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: float
    paoi_optimized_s: float
    paoi_straight_s: float
    outer_iters: int
    wall_time_s: float
    status: str

    def as_tuple(self):
        return dataclasses.astuple(self)


@dataclass(frozen=True)
class PointResult:
    """one sweep point: its CSV row and the solutions behind it (None when a solve failed)."""
    row: SweepRow
    optimized: Optional[object] = None
    straight: Optional[object] = None


def straight_baseline(scn):
    """the 2N evenly spaced waypoints on the segment q_0 -> q_f."""
    return Trajectory.straight(scn.uav_start, scn.uav_end, scn.n_packets)


def saturation_limit(scn, traj):
    """
    average PAoI as both budgets grow without bound on a fixed trajectory.

    every service time drops to its mobility minimum, the last downlink
    (theta'_N = 0) to zero.
    """
    d = theta_sequence(traj, scn.v_max, Phase.UP) + theta_sequence(traj, scn.v_max, Phase.DOWN)
    return float((d[:-1] + d[1:]).sum() / (len(d) - 1))


def _status_for(error):
    if isinstance(error, InfeasibleError):
        return 'infeasible'
    return f'failed:{type(error).__name__}'


def run_point(parameter, value, scn, settings=None, baseline=False):
    """
    solve one sweep point; solver errors end up in the row's status.

    returns:
        PointResult: the row plus the optimized (and straight) solutions.
    """
    parameter = SweepParameter(parameter)
    started = time.perf_counter()
    optimized = straight = None
    paoi_opt = paoi_straight = math.nan
    iters = 0
    try:
        point = parameter.apply(scn, value)
        optimized = bcd.run(point, straight_baseline(point), settings)
        paoi_opt, iters, status = optimized.avg_paoi_s, optimized.iterations, optimized.status
        if baseline:
            straight = bcd.solve_fixed_trajectory(point, straight_baseline(point), settings)
            paoi_straight = straight.avg_paoi_s
    except PaoiError as e:
        logger.warning("sweep point %s=%g failed: %s", parameter.value, value, e)
        status = _status_for(e)
    wall = time.perf_counter() - started
    row = SweepRow(parameter.value, float(value), paoi_opt, paoi_straight, iters, wall, status)
    return PointResult(row, optimized, straight)


def worker_count(default=None):
    """worker count from PAOI_WORKERS, else default (None lets the pool decide)."""
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == '':
        return default
    try:
        workers = int(raw)
    except ValueError as e:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from e
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {workers}")
    return workers


def run_sweep(spec, scn, settings=None, workers=None):
    """
    run every sweep point and return the results ordered by value.

    args:
        spec (SweepSpec): parameter, values and output options.
        scn (Scenario): base scenario the parameter is applied to.
        settings (BcdSettings | None): solver parameters shared by all points.
        workers (int | None): pool size; PAOI_WORKERS when None. 1 runs in-process.

    returns:
        list[PointResult]: one per value, in the order of spec.values.
    """
    workers = workers if workers is not None else worker_count()
    n = len(spec.values)
    args = ([spec.parameter] * n, spec.values, [scn] * n, [settings] * n, [spec.baseline] * n)
    logger.info("sweeping %s over %d values", spec.parameter.value, n)
    if workers == 1:
        results = list(map(run_point, *args))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_point, *args))
    if spec.out_dir is not None:
        write_sweep_outputs(spec, scn, results, spec.out_dir)
    return results


def write_rows_csv(rows, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow(row.as_tuple())


def read_rows_csv(path):
    with open(path, newline='') as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != SWEEP_HEADER:
            raise ConfigError(f"unexpected sweep header {header}")
        return [SweepRow(p, float(v), float(a), float(b), int(k), float(w), s)
                for p, v, a, b, k, w, s in reader]


def write_trajectory_csv(traj, alloc, path):
    """one row per hovering point: i (1-based), phase, x_m, y_m, d_s, E_j."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_HEADER)
        for i in range(traj.n_packets):
            for phase in Phase:
                x, y = traj.points(phase)[i]
                writer.writerow((i + 1, phase.value, float(x), float(y),
                                 float(alloc.times(phase)[i]), float(alloc.energies(phase)[i])))


def read_trajectory_csv(path):
    """
    parse a file written by write_trajectory_csv.

    returns:
        tuple[Trajectory, Allocation]
    """
    with open(path, newline='') as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != TRAJECTORY_HEADER:
            raise ConfigError(f"unexpected trajectory header {header}")
        rows = list(reader)
    if not rows or len(rows) % 2:
        raise ConfigError(f"{path} must hold two rows per packet")
    points = np.array([[float(r[2]), float(r[3])] for r in rows])
    d = np.array([float(r[4]) for r in rows]).reshape(-1, 2)
    e = np.array([float(r[5]) for r in rows]).reshape(-1, 2)
    expected = [Phase.UP.value, Phase.DOWN.value] * (len(rows) // 2)
    if [r[1] for r in rows] != expected:
        raise ConfigError(f"{path} must alternate up/down rows")
    alloc = Allocation(d_up=d[:, 0], d_down=d[:, 1], e_up=e[:, 0], e_down=e[:, 1])
    return Trajectory.from_flat(points), alloc


def write_aoi_curve_csv(alloc, path, samples_per_packet=20):
    ts, ages = aoi_curve(alloc, samples_per_packet)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(AOI_CURVE_HEADER)
        writer.writerows(zip(ts.tolist(), ages.tolist()))


def scenario_dict(scn):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(scn).items()}


def solution_dict(solution):
    alloc = solution.allocation
    return {
        'avg_paoi_s': solution.avg_paoi_s,
        'iterations': solution.iterations,
        'status': solution.status,
        'degraded': solution.degraded,
        'objective_trace': list(solution.objective_trace),
        'trajectory': solution.trajectory.waypoints.tolist(),
        'allocation': {name: getattr(alloc, name).tolist() for name in ('d_up', 'd_down', 'e_up', 'e_down')},
    }


def write_solution_json(solution, scn, path):
    with open(path, 'w') as f:
        json.dump({'scenario': scenario_dict(scn), 'solution': solution_dict(solution)}, f, indent=2)


def write_solution_files(solution, scn, out_dir, aoi_samples=None):
    """solution.json, trajectory.csv and, when aoi_samples is given, aoi_curve.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_solution_json(solution, scn, out / 'solution.json')
    write_trajectory_csv(solution.trajectory, solution.allocation, out / 'trajectory.csv')
    if aoi_samples:
        write_aoi_curve_csv(solution.allocation, out / 'aoi_curve.csv', aoi_samples)
    return out


def _value_tag(value):
    return format(value, 'g')


def write_sweep_outputs(spec, scn, results, out_dir):
    """sweep.csv, summary.json and traj_<param>_<value>[_straight].csv per solved point."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r.row for r in results]
    write_rows_csv(rows, out / 'sweep.csv')
    summary = {
        'sweep': {'parameter': spec.parameter.value, 'values': list(spec.values), 'baseline': spec.baseline},
        'scenario': scenario_dict(scn),
        'rows': [dict(zip(SWEEP_HEADER, (None if isinstance(x, float) and math.isnan(x) else x
                                         for x in row.as_tuple()))) for row in rows],
    }
    with open(out / 'summary.json', 'w') as f:
        json.dump(summary, f, indent=2)
    for result in results:
        stem = f"traj_{result.row.param}_{_value_tag(result.row.value)}"
        if result.optimized is not None:
            write_trajectory_csv(result.optimized.trajectory, result.optimized.allocation, out / f"{stem}.csv")
        if result.straight is not None:
            write_trajectory_csv(result.straight.trajectory, result.straight.allocation,
                                 out / f"{stem}_straight.csv")
    logger.info("sweep results written to %s", out)
    return out
