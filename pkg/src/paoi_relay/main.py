import argparse
import dataclasses
import logging
import sys

from . import bcd, experiments
from .config_manager import ConfigManager
from .errors import (ConfigError, DomainError, InfeasibleError, InvalidScenarioError, NumericError,
                     SolverStallError, SubproblemInfeasibleError)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3


def _values(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser():
    parser = argparse.ArgumentParser(
        prog='paoi_relay',
        description='minimum average peak AoI schedules for a UAV relay link')
    parser.add_argument('-v', '--verbose', action='store_true', help='log solver internals')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='joint trajectory and allocation optimization')
    solve.add_argument('config', help='INI file with a [scenario] section')
    solve.add_argument('--out', default='.', help='output directory')
    solve.add_argument('--eps', type=float, default=None, help='relative PAoI decrease that stops the outer loop')
    solve.add_argument('--aoi-curve', action='store_true', help='also write aoi_curve.csv')

    sweep = sub.add_parser('sweep', help='solve over a range of one parameter')
    sweep.add_argument('config')
    sweep.add_argument('--param', required=True, choices=[p.value for p in experiments.SweepParameter])
    sweep.add_argument('--values', required=True, type=_values,
                       help='comma-separated, strictly increasing (joules, or bits for packet_size)')
    sweep.add_argument('--baseline', action='store_true', help='also solve on the straight trajectory')
    sweep.add_argument('--out', default='.', help='output directory')

    baseline = sub.add_parser('baseline', help='allocation only, on the straight trajectory')
    baseline.add_argument('config')
    baseline.add_argument('--out', default='.', help='output directory')
    baseline.add_argument('--aoi-curve', action='store_true', help='also write aoi_curve.csv')
    return parser


def _settings(manager, eps=None):
    settings = manager.load_settings()
    if eps is not None:
        settings = dataclasses.replace(settings, eps=eps)
    return settings


def _report(solution, out):
    print(f"average PAoI {solution.avg_paoi_s:.6f} s after {solution.iterations} iterations "
          f"({solution.status}); results in {out}")
    return EXIT_SOLVER if solution.degraded else EXIT_OK


def run_solve(args):
    manager = ConfigManager(args.config)
    scn = manager.load_scenario()
    solution = bcd.run(scn, settings=_settings(manager, args.eps))
    out = experiments.write_solution_files(solution, scn, args.out, 20 if args.aoi_curve else None)
    return _report(solution, out)


def run_baseline(args):
    manager = ConfigManager(args.config)
    scn = manager.load_scenario()
    solution = bcd.solve_fixed_trajectory(scn, experiments.straight_baseline(scn), manager.load_settings())
    out = experiments.write_solution_files(solution, scn, args.out, 20 if args.aoi_curve else None)
    return _report(solution, out)


def _sweep_exit_code(rows):
    if any(r.status == 'stalled' or r.status.startswith('failed:') for r in rows):
        return EXIT_SOLVER
    if rows and all(r.status == 'infeasible' for r in rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


def run_sweep(args):
    manager = ConfigManager(args.config)
    scn = manager.load_scenario()
    spec = experiments.SweepSpec(args.param, tuple(args.values), args.baseline, args.out)
    results = experiments.run_sweep(spec, scn, manager.load_settings())
    for r in results:
        print(f"{r.row.param}={r.row.value:g}: optimized {r.row.paoi_optimized_s:.6f} s, "
              f"straight {r.row.paoi_straight_s:.6f} s ({r.row.status})")
    return _sweep_exit_code([r.row for r in results])


COMMANDS = {'solve': run_solve, 'sweep': run_sweep, 'baseline': run_baseline}


def main(argv=None):
    """
    command line entry point.

    returns:
        int: 0 on success, 2 for infeasible or invalid input, 3 when a solver
             stalled or only a degraded solution was found.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except (InfeasibleError, InvalidScenarioError, ConfigError, DomainError) as e:
        logger.error("%s", e)
        return EXIT_INFEASIBLE
    except (SolverStallError, SubproblemInfeasibleError, NumericError) as e:
        logger.error("%s", e)
        return EXIT_SOLVER


if __name__ == '__main__':
    sys.exit(main())
