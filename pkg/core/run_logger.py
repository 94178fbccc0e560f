# core/run_logger.py
# Append CLI reports to a daily JSON-lines log + auto-delete old run logs

import json
import logging
import os
import time
from typing import Any, Dict, Optional

from config import LOG_DIR, LOG_RETENTION_DAYS

logger = logging.getLogger(__name__)


def _cleanup_old_logs(log_dir: str, retention_days: int) -> None:
    """
    Delete run logs older than retention_days.
    """
    if not os.path.exists(log_dir):
        return

    now = time.time()
    cutoff = retention_days * 86400  # seconds

    for fname in os.listdir(log_dir):
        if not fname.startswith("runs_") or not fname.endswith(".log"):
            continue

        fpath = os.path.join(log_dir, fname)
        try:
            mtime = os.path.getmtime(fpath)
        except OSError:
            continue

        if now - mtime > cutoff:
            try:
                os.remove(fpath)
                logger.info("[LOG CLEANUP] removed old run log: %s", fname)
            except OSError as e:
                logger.warning("[LOG CLEANUP] could not remove %s: %s", fname, e)


def log_run(
    report: Dict[str, Any],
    log_dir: Optional[str] = None,
    retention_days: Optional[int] = None,
) -> Optional[str]:
    """
    Write one report as a JSON line to logs/runs_YYYY-MM-DD.log, then prune old files.
    Called from cli/cli_core.py after every command. Returns the file path, or None on failure.
    """
    log_dir = log_dir or LOG_DIR
    retention = LOG_RETENTION_DAYS if retention_days is None else retention_days
    try:
        os.makedirs(log_dir, exist_ok=True)

        date_str = time.strftime("%Y-%m-%d")
        log_file = os.path.join(log_dir, f"runs_{date_str}.log")

        with open(log_file, "a", encoding="utf-8") as f:
            f.write(json.dumps(report, ensure_ascii=False) + "\n")

        _cleanup_old_logs(log_dir, retention)
        return log_file
    except (OSError, TypeError, ValueError) as e:
        logger.warning("could not write run log: %s", e)
        return None
