"""Command-line front end.

Exit codes: 0 success, 1 acceptance check failed (bench only), 2 usage or
validation error, 3 numerical failure.

``--config FILE`` reads flat ``key=value`` lines whose keys are flag names
(``n-reps=5`` or ``n_reps=5``); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, export
from .accumulation_model import AccumulationModel, min_time_closed_form
from .cloglog_model import ConvergenceError, ModelParams, SeparationError, optimal_covariates, optimal_criterion
from .dpp_solver import (
    GridOverflowError,
    MaxDConfig,
    MinTimeConfig,
    Schedule,
    SearchSpaceError,
    extract_schedule_max_d,
    extract_schedule_min_time,
    solve_max_d,
    solve_min_time,
)
from .experiment_sim import (
    AdhocGrowth,
    DppMaxD,
    DppMinTime,
    FixedBatch,
    InitializationError,
    SimulationConfig,
    aggregate,
    run_replications,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
NUMERICAL_ERRORS = (ConvergenceError, GridOverflowError, InitializationError, SeparationError, SearchSpaceError)
POLICIES = ("dpp-max-d", "dpp-min-time", "adhoc-growth", "fixed-batch")


class UsageError(ValueError):
    pass


def read_config(path: str) -> list[str]:
    """Turn a key=value file into flag tokens."""
    tokens = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        low = value.lower()
        if low in ("true", "yes", "on"):
            tokens.append(flag)
        elif low in ("false", "no", "off"):
            continue
        else:
            tokens += [flag, value]
    return tokens


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory for CSV files")
    common.add_argument("--config", help="key=value file with default flag values")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--n-d", type=_positive_int, default=2000)
    grid.add_argument("--spacing", choices=("geometric", "uniform"), default="geometric")
    grid.add_argument("--d-min", type=float)

    p = argparse.ArgumentParser(prog="dppdesign", description="Cost-efficient batch-sequential D-optimal design")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", parents=[common], help="two-point D-optimal design")
    d.add_argument("--a", type=float, default=1.0)
    d.add_argument("--b", type=float, default=0.0)

    m = sub.add_parser("solve-max-d", parents=[common, grid], help="maximise D by a fixed horizon")
    m.add_argument("--t", type=int, required=True)
    m.add_argument("--cs", type=int, required=True)
    m.add_argument("--d0", type=float, required=True)
    m.add_argument("--d-max", type=float)
    m.add_argument("--t-stride", type=_positive_int, default=1, help="write every k-th time column")

    v = sub.add_parser("solve-min-time", parents=[common, grid], help="minimise time to a target D")
    v.add_argument("--d0", type=float, required=True)
    v.add_argument("--dfinal", type=float, required=True)
    v.add_argument("--cs", type=int, required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte-Carlo replications of a policy")
    s.add_argument("--preset", choices=("lab-benchmark",))
    s.add_argument("--policy", choices=POLICIES, default="dpp-max-d")
    s.add_argument("--a", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--guess-a", type=float)
    s.add_argument("--guess-b", type=float)
    s.add_argument("--t", type=int)
    s.add_argument("--cs", type=int)
    s.add_argument("--init-stage", type=int)
    s.add_argument("--n-reps", type=int)
    s.add_argument("--rate", type=float, default=0.10)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--d0-model", type=float, help="model D the DPP schedule starts from")
    s.add_argument("--dfinal", type=float, help="target model D for dpp-min-time")
    s.add_argument("--n-d", type=_positive_int, default=2000)
    s.add_argument("--d-at-truth", action="store_true", help="evaluate observed D at the true parameters")

    b = sub.add_parser("bench", parents=[common], help="run the acceptance sweep")
    b.add_argument("--only", help="comma-separated check numbers, e.g. 1,2,8")
    return p


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if known.config and argv and not argv[0].startswith("-"):
        argv = [argv[0]] + read_config(known.config) + argv[1:]
    return parser.parse_args(argv)


def _outdir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_schedule(schedule: Schedule) -> None:
    print("update_times=" + ",".join(str(t) for t in schedule.update_times))
    print("stage_lengths=" + ",".join(str(n) for n in schedule.stage_lengths))


def cmd_design(args) -> int:
    if not args.a > 0:
        raise UsageError("--a must be positive")
    design = optimal_covariates(ModelParams(args.a, args.b))
    print(f"z1={float(design.z1)!r}")
    print(f"z2={float(design.z2)!r}")
    print(f"x1={float(design.x1)!r}")
    print(f"x2={float(design.x2)!r}")
    print(f"sqrt_det_J_star={optimal_criterion()!r}")
    return EXIT_OK


def cmd_solve_max_d(args) -> int:
    cfg = MaxDConfig(args.t, args.cs, args.d0, args.d_min, args.d_max, args.n_d, args.spacing)
    table = solve_max_d(cfg)
    schedule = extract_schedule_max_d(table)
    out = _outdir(args)
    if out:
        export.write_max_d_table(table, out / "max_d_table.csv", args.t_stride)
        export.write_schedule(schedule, out / "schedule.csv")
    print(f"u(D0,0)={table.value(args.d0, 0)!r}")
    print(f"final_d={schedule.final_d!r}")
    _print_schedule(schedule)
    return EXIT_OK


def cmd_solve_min_time(args) -> int:
    out = _outdir(args)
    if args.cs < 0:
        raise UsageError("--cs must be nonnegative")
    if not args.d0 > 0:
        raise UsageError("--d0 must be positive")
    if args.d0 >= args.dfinal:
        schedule = Schedule([], [], args.d0, 0, args.cs, total_cost=0)
        if out:
            export.write_schedule(schedule, out / "schedule.csv")
        print("total_time=0")
        _print_schedule(schedule)
        return EXIT_OK
    cfg = MinTimeConfig(args.dfinal, args.cs, args.d0, args.d_min, args.n_d, args.spacing)
    table = solve_min_time(cfg)
    schedule = extract_schedule_min_time(table)
    if out:
        export.write_min_time_table(table, out / "min_time_table.csv")
        export.write_schedule(schedule, out / "schedule.csv")
    print(f"total_time={table.value(args.d0)}")
    if args.cs == 0:
        print(f"continuum_time={min_time_closed_form(AccumulationModel(), args.d0, args.dfinal)!r}")
    _print_schedule(schedule)
    return EXIT_OK


def simulation_config(args) -> SimulationConfig:
    base = dict(bench.LAB_BENCHMARK) if args.preset == "lab-benchmark" else {}
    pick = {
        "true_params": (args.a, args.b),
        "init_guess": (args.guess_a, args.guess_b),
    }
    for key, (a, b) in pick.items():
        if a is not None or b is not None:
            if a is None or b is None:
                raise UsageError(f"{key.replace('_', ' ')} needs both slope and intercept")
            base[key] = ModelParams(a, b)
    for key, val in (("T", args.t), ("Cs", args.cs), ("init_stage", args.init_stage), ("n_reps", args.n_reps)):
        if val is not None:
            base[key] = val
    if args.d0_model is not None:
        base["D0_model"] = args.d0_model
    base.setdefault("n_reps", 100)
    base.setdefault("init_stage", 100)
    base["seed"] = args.seed
    missing = [k for k in ("true_params", "T", "Cs") if k not in base]
    if missing:
        raise UsageError("simulate needs --a/--b, --t and --cs (or --preset): missing " + ", ".join(missing))
    base.setdefault("init_guess", base["true_params"])

    if args.policy == "dpp-max-d":
        if "D0_model" not in base:
            raise UsageError("dpp-max-d needs --d0-model")
        table = solve_max_d(MaxDConfig(base["T"], base["Cs"], base["D0_model"], n_d=args.n_d))
        policy = DppMaxD(extract_schedule_max_d(table))
    elif args.policy == "dpp-min-time":
        if "D0_model" not in base or args.dfinal is None:
            raise UsageError("dpp-min-time needs --d0-model and --dfinal")
        policy = DppMinTime(solve_min_time(MinTimeConfig(args.dfinal, base["Cs"], base["D0_model"], n_d=args.n_d)))
    elif args.policy == "adhoc-growth":
        if not args.rate > -1:
            raise UsageError("--rate must exceed -1")
        policy = AdhocGrowth(args.rate)
    else:
        if args.batch_size is None or args.batch_size < 1:
            raise UsageError("fixed-batch needs a positive --batch-size")
        policy = FixedBatch(args.batch_size)
    return SimulationConfig(
        base["true_params"], base["T"], base["Cs"], base["init_stage"], base["init_guess"],
        base["n_reps"], base["seed"], policy, args.d_at_truth,
    )


def cmd_simulate(args) -> int:
    cfg = simulation_config(args)
    trajectories = run_replications(cfg)
    summary = aggregate(trajectories)
    out = _outdir(args)
    if out:
        export.write_trajectories(trajectories, out / "trajectories.csv")
        export.write_summary(summary, out / "summary.csv")
        sys.stdout.write(export.write_summary(summary[-1:]))
    else:
        sys.stdout.write(export.write_summary(summary))
    return EXIT_OK


def cmd_bench(args) -> int:
    selected = None
    if args.only:
        try:
            selected = [int(s) for s in args.only.split(",") if s.strip()]
        except ValueError as exc:
            raise UsageError("--only takes comma-separated integers") from exc
        unknown = set(selected) - set(bench.CHECKS)
        if unknown:
            raise UsageError(f"no such checks: {sorted(unknown)}")
    results = bench.run_all(selected, report=print)
    out = _outdir(args)
    if out:
        (out / "bench.txt").write_text("".join(r.line() + "\n" for r in results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {
    "design": cmd_design,
    "solve-max-d": cmd_solve_max_d,
    "solve-min-time": cmd_solve_min_time,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits 2 on bad flags and 0 on --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
