"""``place`` command line.

Exit codes: 0 success, 1 invalid input, 2 infeasible, 3 certificate failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import experiments as ex
from .errors import ModelError, PlacementError, RefusedScale
from .output import render
from .placement import InfeasibleProblem, Method
from .riccati import DEFAULT_MAX_ITER, DEFAULT_TOL

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_CERTIFICATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which would collide with "infeasible"
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _budget(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid budget {text!r}") from None
    if not value >= 0 or math.isinf(value):
        raise argparse.ArgumentTypeError("budget must be a finite nonnegative number")
    return int(value) if value.is_integer() else value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _common(p, methods_default):
    p.add_argument("--case", required=True, help="case file or builtin name (bus3, bus11)")
    p.add_argument("--coords", choices=["voltages", "currents"], default="voltages")
    p.add_argument("--method", default=methods_default,
                   help="bnb, greedy-in, greedy-out, exhaustive, a comma list, or all (the three solvers)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=None,
                   help="output format (default: from --out suffix, else csv)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--timings", action="store_true", help="add wall-clock columns (not reproducible)")


def build_parser():
    parser = _Parser(prog="place", description="Optimal PMU placement for descriptor Kalman filtering.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="one placement at one budget")
    _common(p, "bnb")
    p.add_argument("--budget", type=_budget, required=True)

    p = sub.add_parser("budget-sweep", help="every integer budget in a range")
    _common(p, "all")
    p.add_argument("--b-min", type=int, required=True)
    p.add_argument("--b-max", type=int, required=True)
    p.add_argument("--plot", help="also render the sweep to this image file")

    p = sub.add_parser("noise-sweep", help="scale process noise of one equation")
    _common(p, "all")
    p.add_argument("--budget", type=_budget, action="append",
                   help="budget to solve at (repeatable); or use --b-min/--b-max")
    p.add_argument("--b-min", type=int)
    p.add_argument("--b-max", type=int)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--equation-index", type=int, action="append",
                        help="row of Q to scale (repeatable)")
    target.add_argument("--bus", help="scale both rows of this bus's balance equation")
    p.add_argument("--scale-min", type=float, default=1e-2)
    p.add_argument("--scale-max", type=float, default=1e2)
    p.add_argument("--points", type=_positive_int, default=10)
    p.add_argument("--plot", help="also render the sweep to this image file")

    p = sub.add_parser("condition-compare", help="conditioning of voltage and current coordinates")
    p.add_argument("--case", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-min", type=_positive_int, default=1)
    p.add_argument("--count-max", type=_positive_int, default=None)
    p.add_argument("--configs-per-count", type=_positive_int, default=20)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    p.add_argument("--plot", help="also render the comparison to this image file")

    p = sub.add_parser("certify", help="exact solve plus LMI certificate check")
    _common(p, "bnb")
    p.add_argument("--budget", type=_budget, required=True)
    p.add_argument("--debug-perturb", type=float, default=None, metavar="FACTOR",
                   help="scale the covariance before checking (exercises the failure path)")
    return parser


def _format(args):
    if args.format:
        return args.format
    if args.out and Path(args.out).suffix.lower() == ".json":
        return "json"
    return "csv"


def _emit(records, command, args):
    text = render(records, command, _format(args))
    if args.out:
        Path(args.out).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def _settings(args):
    return ex.SolverSettings(tol=args.tol, max_iter=args.max_iter,
                             workers=getattr(args, "workers", 1), timings=getattr(args, "timings", False))


def _any_infeasible(records):
    return any(not math.isfinite(r["objective"]) for r in records if "objective" in r)


def _single_method(args, M):
    methods = ex.resolve_methods(args.method, M)
    if len(methods) != 1:
        raise UsageError(f"{args.command} takes exactly one method")
    return methods[0]


def _budgets(args):
    if args.budget:
        return sorted(set(args.budget))
    if args.b_min is None or args.b_max is None:
        raise UsageError("noise-sweep needs --budget or both --b-min and --b-max")
    if args.b_min > args.b_max:
        raise UsageError("--b-min must not exceed --b-max")
    return list(range(args.b_min, args.b_max + 1))


def run(args):
    model = ex.load_model(args.case)
    M = len(model.candidates)
    settings = _settings(args)
    cmd = args.command

    if cmd == "solve":
        method = _single_method(args, M)
        rec, _, _ = ex.solve(model, args.coords, method, args.budget, settings)
        _emit([rec], cmd, args)
        return EXIT_INFEASIBLE if _any_infeasible([rec]) else EXIT_OK

    if cmd == "budget-sweep":
        if args.b_min > args.b_max:
            raise UsageError("--b-min must not exceed --b-max")
        methods = ex.resolve_methods(args.method, M)
        records = ex.budget_sweep(model, args.coords, methods, args.b_min, args.b_max, settings)
        _emit(records, cmd, args)
        if args.plot:
            from .plotting import plot_budget_sweep
            plot_budget_sweep(records, args.plot, title=model.case.name)
        return EXIT_INFEASIBLE if _any_infeasible(records) else EXIT_OK

    if cmd == "noise-sweep":
        methods = ex.resolve_methods(args.method, M)
        rows = model.equation_rows(args.bus) if args.bus is not None else tuple(args.equation_index)
        scales = ex.noise_scales(args.scale_min, args.scale_max, args.points)
        records = ex.noise_sweep(model, args.coords, methods, _budgets(args), rows, scales, settings)
        _emit(records, cmd, args)
        if args.plot:
            from .plotting import plot_noise_sweep
            plot_noise_sweep(records, args.plot, title=model.case.name)
        return EXIT_INFEASIBLE if _any_infeasible(records) else EXIT_OK

    if cmd == "condition-compare":
        hi = M if args.count_max is None else args.count_max
        if args.count_min > hi:
            raise UsageError("--count-min must not exceed --count-max")
        records = ex.condition_compare(model, range(args.count_min, hi + 1), args.configs_per_count,
                                       args.seed, settings)
        _emit(records, cmd, args)
        if args.plot:
            from .plotting import plot_condition_compare
            plot_condition_compare(records, args.plot, title=model.case.name)
        return EXIT_OK

    if cmd == "certify":
        method = _single_method(args, M)
        if method not in (Method.BRANCH_AND_BOUND, Method.EXHAUSTIVE):
            raise UsageError("certify needs --method bnb or exhaustive")
        rec, report = ex.certify(model, args.coords, method, args.budget, settings, args.debug_perturb)
        _emit([rec], cmd, args)
        if report is None:
            return EXIT_INFEASIBLE
        return EXIT_OK if report.passed else EXIT_CERTIFICATE

    raise UsageError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleProblem as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ModelError, RefusedScale, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PlacementError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
