# cli/cli_common.py
# Report assembly and output: JSON report to --out (or stdout), CSV rows to --csv.

import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from core.errors import ProblemParseError, SatrepError
from core.settings import Tolerances

logger = logging.getLogger(__name__)

REPORT_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CAP = 2


@dataclass
class CommandResult:
    payload: Dict[str, Any]
    exit_code: int = EXIT_OK
    csv_header: Optional[Sequence[str]] = None
    csv_rows: List[Sequence[Any]] = field(default_factory=list)


def build_report(
    command: str,
    args: Dict[str, Any],
    tols: Tolerances,
    result: Optional[Dict[str, Any]],
    started: float,
    started_wall: float,
    error: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Machine-readable record of one run: the command and its arguments, every tolerance
    and cap in effect, the result payload (or error), and wall-clock timing.
    """
    report: Dict[str, Any] = {
        "version": REPORT_VERSION,
        "command": {"name": command, "args": args},
        "config": {"tolerances": tols.as_dict()},
        "timing": {
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started_wall)),
            "wall_seconds": round(time.perf_counter() - started, 6),
        },
    }
    for key in ("seed", "n_max", "n_steps", "n_traj", "bins"):
        if args.get(key) is not None:
            report["config"][key] = args[key]
    if error is not None:
        report["error"] = error
    else:
        report["result"] = result
    return report


def error_payload(exc: BaseException) -> Dict[str, Any]:
    out: Dict[str, Any] = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ProblemParseError):
        out["path"] = exc.path
        out["position"] = exc.position
    return out


def error_line(exc: BaseException) -> str:
    """One-line stderr message."""
    if isinstance(exc, SatrepError):
        return f"satrep: error: {type(exc).__name__}: {exc}"
    return f"satrep: error: {exc}"


def write_report(report: Dict[str, Any], out_path: Optional[str]) -> None:
    text = json.dumps(report, indent=2, ensure_ascii=False)
    if not out_path:
        sys.stdout.write(text + "\n")
        return
    folder = os.path.dirname(out_path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    logger.info("report written to %s", out_path)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("%d csv rows written to %s", len(rows), path)
