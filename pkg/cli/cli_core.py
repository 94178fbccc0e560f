# cli/cli_core.py
# Command-line front end: argument parsing, tolerance merging, dispatch, report/CSV output, exit codes.
#
# Exit codes: 0 success (Finite for saturation), 2 saturation cap exceeded, 1 any error.

import argparse
import json
import logging
import sys
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config import DEFAULT_BINS, DEFAULT_N_MAX, LOG_LEVEL
from core.errors import ProblemParseError, SatrepError
from core.run_logger import log_run
from core.settings import Tolerances, tolerances
from cli.cli_commands import cmd_hellinger, cmd_preorder, cmd_saturation, cmd_simulate
from cli.cli_common import (
    EXIT_ERROR,
    CommandResult,
    build_report,
    error_line,
    error_payload,
    write_csv,
    write_report,
)
from cli.cli_problem import load_problem, parse_state_arg
from quantum.povm import DensityMatrix

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for an exceeded saturation cap."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def parse_n_list(text: str) -> List[int]:
    """'1-6' or '1,2,4' (or a mix: '1-3,8')."""
    out: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad n list '{text}'") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"n list must hold positive integers, got '{text}'")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="satrep", description="Saturation of repeated quantum measurements.")
    parser.add_argument("--tol-file", help="JSON object of tolerance overrides")
    parser.add_argument("--out", help="write the JSON report here instead of stdout")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {LOG_LEVEL})")
    parser.add_argument("--no-run-log", action="store_true", help="do not append the report to the run log")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("saturation", help="smallest n with A_{n+1} <= A_n")
    p.add_argument("problem")
    p.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)

    p = sub.add_parser("preorder", help="decide A <= B")
    p.add_argument("problem_a")
    p.add_argument("problem_b")
    p.add_argument("--both", action="store_true", help="also decide B <= A (equivalence)")

    p = sub.add_parser("simulate", help="Monte Carlo trajectories of the repeated measurement")
    p.add_argument("problem")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-steps", type=int, default=200)
    p.add_argument("--n-traj", type=int, default=1000)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--psi", help="initial state vector as JSON (overrides the problem's state)")
    p.add_argument("--csv", help="per-trajectory final frequencies")

    p = sub.add_parser("hellinger", help="H^2 between A_n outcome laws of two states")
    p.add_argument("problem")
    p.add_argument("--n-list", type=parse_n_list, default=parse_n_list("1-6"))
    p.add_argument("--psi1", required=True, help="state vector as JSON")
    p.add_argument("--psi2", required=True, help="state vector as JSON")
    p.add_argument("--csv", help="plot-ready table")

    return parser


def load_tolerances(tol_file: Optional[str], base: Tolerances = tolerances) -> Tolerances:
    if not tol_file:
        return base
    try:
        with open(tol_file, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise ProblemParseError(f"cannot read tolerance file: {e.strerror}", tol_file) from None
    except json.JSONDecodeError as e:
        raise ProblemParseError(f"invalid JSON: {e.msg}", tol_file, f"{e.lineno}:{e.colno}") from None
    if not isinstance(raw, dict):
        raise ProblemParseError("tolerance file must hold a JSON object", tol_file, "/")
    return base.with_overrides(raw)


def _dispatch(args: argparse.Namespace, base: Tolerances) -> Tuple[CommandResult, Tolerances]:
    if args.command == "preorder":
        pa = load_problem(args.problem_a, base)
        pb = load_problem(args.problem_b, base)
        tols = base.with_overrides({**pa.tolerance_overrides, **pb.tolerance_overrides})
        return cmd_preorder(pa, pb, args.both, tols), tols

    problem = load_problem(args.problem, base)
    tols = base.with_overrides(problem.tolerance_overrides)
    dim = problem.as_instrument(tols).dim

    if args.command == "saturation":
        return cmd_saturation(problem, args.n_max, tols), tols
    if args.command == "simulate":
        state = DensityMatrix.from_vector(parse_state_arg(args.psi, dim, tols)) if args.psi else None
        return cmd_simulate(problem, state, args.n_steps, args.n_traj, args.seed, args.bins, tols), tols
    psi1 = parse_state_arg(args.psi1, dim, tols)
    psi2 = parse_state_arg(args.psi2, dim, tols)
    return cmd_hellinger(problem, args.n_list, psi1, psi2, tols), tols


def _echo_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k not in ("log_level", "no_run_log")}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one command, emit its report. Returns the exit code."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        level = getattr(logging, str(args.log_level).upper(), None)
        if isinstance(level, int):
            logging.getLogger().setLevel(level)
        else:
            logger.warning("unknown log level '%s', keeping the current one", args.log_level)

    started = time.perf_counter()
    started_wall = time.time()
    tols = tolerances
    try:
        tols = load_tolerances(args.tol_file)
        result, tols = _dispatch(args, tols)
    except SatrepError as e:
        sys.stderr.write(error_line(e) + "\n")
        report = build_report(args.command, _echo_args(args), tols, None, started, started_wall, error_payload(e))
        _emit(report, args)
        return EXIT_ERROR

    report = build_report(args.command, _echo_args(args), tols, result.payload, started, started_wall)
    _emit(report, args)
    csv_path = getattr(args, "csv", None)
    if csv_path and result.csv_header is not None:
        try:
            write_csv(csv_path, result.csv_header, result.csv_rows)
        except OSError as e:
            logger.warning("could not write csv to %s: %s", csv_path, e)
    return result.exit_code


def _emit(report: Dict[str, Any], args: argparse.Namespace) -> None:
    try:
        write_report(report, args.out)
    except OSError as e:
        logger.warning("could not write report to %s: %s", args.out, e)
    if not args.no_run_log:
        log_run(report)
