"""Command-line front end.

Subcommands:

    maxham run <scenario> [--steps N] [--dt DT] [--method M] ...
    maxham check <irregularity|redundancy|brackets|adjoint|all> [scenario]
    maxham list-scenarios

Exit codes: 0 success / all checks pass, 1 check failure, 2 usage or
configuration error, 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import doubling, geometry, integrate, maxwell, media, scenario as scn
from .grid import FieldState, Grid3
from .integrate import BlowUpError, StepperSpec

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_BLOWUP = 3

#: configuration used by `check` when no scenario file is given
DEFAULT_CHECK_GRID = dict(n1=8, n2=8, n3=8, origin=(0.0, 0.0, 0.0),
                          extent=(1.0, 1.0, 1.0))


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="maxham",
        description="Doubled-variable Hamiltonian evolution of source-free "
                    "Maxwell fields on periodic curvilinear grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write monitors/snapshots")
    run_p.add_argument("scenario", help="scenario file path or shipped scenario name")
    run_p.add_argument("--steps", type=_positive_int, default=None,
                       help="override n_steps")
    run_p.add_argument("--dt", type=_positive_float, default=None,
                       help="override time step")
    run_p.add_argument("--method", choices=("rk4", "implicit_midpoint"),
                       default=None, help="override stepper method")
    run_p.add_argument("--monitor-every", type=_positive_int, default=None,
                       help="override monitor cadence")
    run_p.add_argument("--output-dir", default=None, help="override output directory")

    check_p = sub.add_parser("check", help="run the structural verification checks")
    check_p.add_argument("which", choices=("irregularity", "redundancy",
                                           "brackets", "adjoint", "all"))
    check_p.add_argument("scenario", nargs="?", default=None,
                         help="optional scenario supplying chart/medium/grid/c")

    sub.add_parser("list-scenarios", help="list scenario files shipped with the package")
    return parser


def _resolve_scenario_path(name_or_path):
    if os.path.exists(name_or_path):
        return name_or_path
    shipped = scn.shipped_scenarios()
    if name_or_path in shipped:
        return shipped[name_or_path]
    raise scn.ScenarioError(
        [f"no such scenario file or shipped scenario: {name_or_path!r} "
         f"(shipped: {', '.join(sorted(shipped))})"])


def cmd_run(args) -> int:
    s = scn.load_scenario(_resolve_scenario_path(args.scenario))
    stepper = s.stepper
    replacements = {}
    if args.dt is not None:
        replacements["dt"] = args.dt
    if args.method is not None:
        replacements["method"] = args.method
    if replacements:
        stepper = dataclasses.replace(stepper, **replacements)
    n_steps = args.steps if args.steps is not None else s.n_steps
    monitor_every = args.monitor_every if args.monitor_every is not None \
        else s.monitor_every
    out_dir = args.output_dir if args.output_dir is not None else s.output_dir

    op = scn.build_operator(s)
    state = scn.initial_doubled_state(s)
    os.makedirs(out_dir, exist_ok=True)

    def callback(i, t, st):
        if s.snapshot_every > 0 and i % s.snapshot_every == 0:
            path = os.path.join(out_dir, f"snapshot_{i:06d}.txt")
            from .grid import write_snapshot
            write_snapshot(path, FieldState(s.grid, st.q))

    final, series = integrate.run(op, state, stepper, n_steps,
                                  monitor_every=monitor_every,
                                  callback=callback)
    comments = [f"scenario = {s.name}"]
    if s.initial.momentum == "random":
        comments.append(f"rng = numpy PCG64, seed = {s.initial.momentum_seed}")
    integrate.write_monitors_csv(os.path.join(out_dir, "monitors.csv"),
                                 series, comments=comments)
    last = series[-1]
    print(f"final record: t = {last.t:.9g}, hamiltonian = {last.hamiltonian:.9g}, "
          f"energy = {last.energy:.9g}, div_b = {last.div_b:.3e}, "
          f"div_d = {last.div_d:.3e}")
    print(f"wrote {os.path.join(out_dir, 'monitors.csv')}")
    return EXIT_OK


def _check_context(scenario_arg):
    """(operator, grid, c) for the checks, from a scenario or the default box."""
    if scenario_arg is not None:
        s = scn.load_scenario(_resolve_scenario_path(scenario_arg))
        return scn.build_operator(s), s.grid, s.c
    grid = Grid3(**DEFAULT_CHECK_GRID)
    op = maxwell.MaxwellOperator(geometry.cartesian(), media.vacuum(), grid, c=1.0)
    return op, grid, 1.0


def cmd_check(args) -> int:
    op, grid, c = _check_context(args.scenario)
    which = args.which
    reports = []

    if which in ("irregularity", "all"):
        reports.append(maxwell.irregularity_report(c))
        if c != 2.998e10:
            reports.append(maxwell.irregularity_report(2.998e10))

    if which in ("redundancy", "all"):
        rng = np.random.default_rng(2024)
        q = rng.standard_normal((6,) + grid.shape)
        reports.append(maxwell.verify_redundancy(op, q))

    if which in ("brackets", "all"):
        reports.append(doubling.bracket_axioms_report(grid, seed=11))
        zero_q = np.zeros((6,) + grid.shape)
        reports.append(doubling.check_first_group_identity(op, zero_q))

    if which in ("adjoint", "all"):
        reports.append(doubling.transpose_contract_report(op, n_pairs=100, seed=5))
        reports.append(maxwell.adjoint_consistency_report(
            geometry.cylindrical, media.vacuum,
            lambda n: Grid3(n, n, n, origin=(1.0, 0.0, 0.0),
                            extent=(1.0, 2.0 * np.pi, 1.0)),
            sizes=(16, 32), c=c))

    all_passed = True
    for report in reports:
        print(report.render())
        print(f"CHECK {report.name.replace(' ', '-')}: "
              f"{'PASS' if report.passed else 'FAIL'}")
        all_passed &= report.passed
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


def cmd_list_scenarios(_args) -> int:
    for name, path in sorted(scn.shipped_scenarios().items()):
        print(f"{name}\t{path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "check":
            return cmd_check(args)
        return cmd_list_scenarios(args)
    except scn.ScenarioError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as err:
        print(f"numerical blow-up: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except (geometry.DegenerateMetricError, media.SingularTensorError,
            integrate.MidpointDivergenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
