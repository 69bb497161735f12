"""Command line environment for molpuc."""
import argparse
import json
import logging
import sys
from typing import List

import pandas as pd
from tabulate import tabulate

from .exceptions import InsufficientMomentsError, MeasureConfigError
from .molpuc import SUITE_ALIASES, SUITES, Molpuc
from .report import FORMATS, Report, summary_table
from .toda import load_flow_config
from .utils import DEFAULT_SEED, VERBOSE_LVL, get_default_fs

logger = logging.getLogger("molpuc.cli")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
SINGLE_SUITE_COMMANDS = ("bilinear", "darboux", "miwa", "products", "elteorema")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--measure", default="herm2", help="bundled measure name, JSON text or path to a measure file")
    common.add_argument("--blocks", type=int, default=12, help="number of blocks N")
    common.add_argument("--tol", type=float, default=None, help="override the suite tolerances")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", default="reports", help="output folder")
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--jobs", type=int, default=None, help="worker threads, NUM_THREADS takes precedence")
    common.add_argument("--log-level", default="ERROR", help="DEBUG, INFO, VERBOSE, WARNING or ERROR")
    common.add_argument("--log-path", default=".")

    parser = argparse.ArgumentParser(prog="molpuc", description="MOLPUC command line environment")
    sub = parser.add_subparsers(dest="command", required=True)
    moments = sub.add_parser("moments", parents=[common], help="write the moments c_n")
    moments.add_argument("--n-max", type=int, default=None)
    sub.add_parser("factorize", parents=[common], help="write quasi-norms and the quasi-definiteness scan")
    sub.add_parser("polys", parents=[common], help="write the MOLPUC coefficients as JSON")
    sub.add_parser("verblunsky", parents=[common], help="write the Verblunsky table")
    verify = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument("--suite", nargs="+", choices=SUITES + tuple(SUITE_ALIASES), required=True)
    flow = sub.add_parser("flow", parents=[common], help="integrate a Toeplitz lattice flow")
    flow.add_argument("--axis", default="total:L1", help="side:j:a for a partial flow or total:Hj, with H read as L")
    flow.add_argument("--t-end", type=float, default=0.3)
    flow.add_argument("--steps", type=int, default=100)
    flow.add_argument("--compare-oracle", action="store_true")
    flow.add_argument("--config", default=None, help="flow config file or JSON text, overrides axis, t-end and steps")
    for name in SINGLE_SUITE_COMMANDS:
        target = SUITE_ALIASES.get(name, name)
        sub.add_parser(name, parents=[common], help=f"run the {target} suite")
    sub.add_parser("all", parents=[common], help="run every suite")
    return parser


def _log_level(text: str) -> int:
    logging.addLevelName(VERBOSE_LVL, "VERBOSE")
    if text.isdigit():
        return int(text)
    level = logging.getLevelName(text.upper())
    if not isinstance(level, int):
        raise MeasureConfigError(f"Unknown log level {text}.")
    return level


def _write_frame(df: pd.DataFrame, out: str, name: str, fmt: str) -> str:
    fs = get_default_fs()
    fs.mkdirs(out, exist_ok=True)
    path = f"{out}/{name}.{fmt}"
    with fs.open(path, "w") as f:
        f.write(df.to_json(orient="records", indent=2) if fmt == "json" else df.to_csv(index=False))
    return path


def _write_json(obj: dict, out: str, name: str) -> str:
    fs = get_default_fs()
    fs.mkdirs(out, exist_ok=True)
    path = f"{out}/{name}.json"
    with fs.open(path, "w") as f:
        f.write(json.dumps(obj, sort_keys=True, indent=2))
    return path


def _finish(reports: List[Report], args) -> int:
    for r in reports:
        r.write(args.out, args.format)
    print(summary_table(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def run(args) -> int:
    """Dispatch a parsed command line.

    Args:
        args (argparse.Namespace): Parsed arguments.

    Returns:
        int: exit code.
    """
    client = Molpuc(
        measure=args.measure,
        blocks=args.blocks,
        tol=args.tol,
        seed=args.seed,
        log_level=_log_level(args.log_level),
        log_path=args.log_path,
        n_jobs=args.jobs,
    )
    cmd = args.command
    if cmd == "moments":
        path = _write_frame(client.moments(args.n_max), args.out, "moments", args.format)
    elif cmd == "factorize":
        df = client.factorize()
        path = _write_frame(df.assign(D=df["D"].map(str)), args.out, "factorization", args.format)
        print(tabulate(df[["side", "level", "condition", "min_singular", "passed"]], headers="keys", tablefmt="psql"))
        if not df["passed"].all():
            return EXIT_FAILED
    elif cmd == "polys":
        path = _write_json(client.polys(), args.out, "polys")
    elif cmd == "verblunsky":
        path = _write_frame(client.verblunsky(), args.out, "verblunsky", args.format)
    elif cmd == "verify":
        return _finish(client.verify_all(args.suite), args)
    elif cmd == "flow":
        if args.config:
            config = load_flow_config(args.config)
            args.axis, args.t_end, args.steps = config.axis, config.t_end, config.steps
        traj, report = client.flow(args.axis, args.t_end, args.steps, args.compare_oracle)
        get_default_fs().mkdirs(args.out, exist_ok=True)
        traj.to_csv(f"{args.out}/trajectory.csv")
        code = _finish([report], args)
        return EXIT_FAILED if traj.truncated else code
    elif cmd in SINGLE_SUITE_COMMANDS:
        return _finish([client.verify(cmd)], args)
    else:
        return _finish(client.verify_all(), args)
    logger.log(VERBOSE_LVL, f"{cmd} written to {path}")
    return EXIT_OK


def _error_report(args, check: str, item_id: str, code: int) -> int:
    # a single unevaluable item, so the report always fails
    report = Report(check, "unknown", args.blocks, 0.0, args.seed)
    report.add(item_id, float("nan"))
    report.write(args.out, args.format)
    print(report.summary())
    return code


def main(argv: List[str] = None) -> int:
    """Entry point of the molpuc command.

    Args:
        argv (List[str], optional): Arguments without the program name. Defaults to sys.argv[1:].

    Returns:
        int: 0 when every selected check passes, 1 on a failed check or an unexpected error, 2 on a configuration
            error. A report is written in every case.
    """
    args = _parser().parse_args(argv)
    try:
        return run(args)
    except (MeasureConfigError, InsufficientMomentsError) as e:
        logger.error(f"Configuration error: {e}")
        return _error_report(args, "config", f"error: {e}", EXIT_CONFIG)
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return _error_report(args, "error", f"error: {type(e).__name__}: {e}", EXIT_FAILED)


if __name__ == "__main__":
    sys.exit(main())
