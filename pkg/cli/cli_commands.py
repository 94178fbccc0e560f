# cli/cli_commands.py
# The four commands: saturation, preorder, simulate, hellinger. Each returns a CommandResult.

import logging
from typing import List, Optional, Sequence

import numpy as np

from core.errors import ProblemParseError
from core.settings import Tolerances, tolerances
from cli.cli_common import EXIT_CAP, EXIT_OK, CommandResult
from cli.cli_problem import Problem
from quantum.asymptotics import (
    estimate_spectral_masses,
    frequency_histogram,
    hellinger_table,
    sample_trajectories,
)
from quantum.instrument import is_binary
from quantum.kernel import label_to_json
from quantum.preorder import (
    labels_to_json,
    luders_saturation_class,
    preceq,
    sat_to_json,
    saturation_step,
)
from quantum.povm import DensityMatrix, StateVector

logger = logging.getLogger(__name__)


def _instrument_summary(problem: Problem, tols: Tolerances) -> dict:
    inst = problem.as_instrument(tols)
    return {"kind": problem.kind, "dim": inst.dim, "outcomes": len(inst)}


def cmd_saturation(problem: Problem, n_max: int, tols: Tolerances = tolerances) -> CommandResult:
    """Exit 0 on Finite(n), 2 when every level up to n_max is strict."""
    inst = problem.as_instrument(tols)
    report = saturation_step(inst, n_max, tols)
    payload = {"instrument": _instrument_summary(problem, tols), **report.to_dict()}

    A = problem.luders_effect()
    if A is not None:
        payload["luders_class"] = sat_to_json(luders_saturation_class(A, tols))

    logger.info("saturation: %s(%d)", report.verdict, report.n)
    return CommandResult(payload, EXIT_OK if report.finite else EXIT_CAP)


def cmd_preorder(problem_a: Problem, problem_b: Problem, both: bool = False, tols: Tolerances = tolerances) -> CommandResult:
    """Certificate for A <= B (kernel over the original labels when it holds); optionally B <= A too."""
    A = problem_a.as_povm(tols)
    B = problem_b.as_povm(tols)
    cert = preceq(A, B, tols)
    payload = {
        "labels_a": labels_to_json(A),
        "labels_b": labels_to_json(B),
        "a_preceq_b": cert.to_dict(),
    }
    if both:
        back = preceq(B, A, tols)
        payload["b_preceq_a"] = back.to_dict()
        payload["equivalent"] = cert.holds and back.holds
    logger.info("preorder: A <= B %s", "holds" if cert.holds else f"fails (gap {cert.gap:.3e})")
    return CommandResult(payload)


def cmd_simulate(
    problem: Problem,
    state: Optional[DensityMatrix],
    n_steps: int,
    n_traj: int,
    seed: int,
    bins: int,
    tols: Tolerances = tolerances,
) -> CommandResult:
    """Histogram of final frequencies plus one CSV row per trajectory."""
    inst = problem.as_instrument(tols)
    rho = state if state is not None else problem.state
    if rho is None:
        raise ProblemParseError("simulate needs an initial state (problem 'state' or --psi)", problem.source, "/state")

    batch = sample_trajectories(inst, rho, n_steps, n_traj, seed, tols)
    payload = {"instrument": _instrument_summary(problem, tols), "n_steps": n_steps, "n_traj": n_traj, "seed": seed}
    rows: List[list] = []

    if is_binary(inst) and n_steps > 0:
        hist = frequency_histogram(batch, bins=bins)
        payload["histogram"] = hist.to_dict()
        payload["mode_bin"] = list(hist.mode_bin()) if n_traj else None
        payload["mean_frequency"] = float(batch.frequencies.mean()) if n_traj else None
        rows = [[t, float(x)] for t, x in enumerate(batch.frequencies)]

        A = problem.luders_effect()
        if A is not None:
            masses = estimate_spectral_masses(batch, A, tols)
            payload["spectral_masses"] = [[lam, m] for lam, m in masses.items()]
    else:
        # non-binary labels: report outcome counts only
        counts = np.bincount(batch.outcomes.reshape(-1), minlength=len(inst)) if batch.outcomes.size else np.zeros(len(inst), dtype=int)
        payload["outcome_counts"] = [[label_to_json(lab), int(c)] for lab, c in zip(inst.labels, counts)]

    return CommandResult(payload, csv_header=("trajectory", "frequency"), csv_rows=rows)


def _eigenvalue_of(A: np.ndarray, psi: StateVector, tols: Tolerances) -> Optional[float]:
    v = psi.amplitudes
    if v.shape[0] != A.shape[0]:
        return None
    lam = float(np.vdot(v, A @ v).real)
    if float(np.max(np.abs(A @ v - lam * v))) <= tols.struct_tol:
        return lam
    return None


def cmd_hellinger(
    problem: Problem,
    n_list: Sequence[int],
    psi1: StateVector,
    psi2: StateVector,
    tols: Tolerances = tolerances,
) -> CommandResult:
    """
    Table of H^2 between the A_n outcome laws of psi1 and psi2. The Lüders closed form is
    added when the problem is a Lüders effect and both states are eigenvectors of it.
    """
    inst = problem.as_instrument(tols)
    eigs = None
    A = problem.luders_effect()
    if A is not None:
        lam1, lam2 = _eigenvalue_of(A, psi1, tols), _eigenvalue_of(A, psi2, tols)
        if lam1 is not None and lam2 is not None:
            eigs = (min(max(lam1, 0.0), 1.0), min(max(lam2, 0.0), 1.0))

    table = hellinger_table(inst, n_list, psi1, psi2, eigs, tols)
    values = [row.enumerated for row in table]
    payload = {
        "instrument": _instrument_summary(problem, tols),
        "eigenvalues": list(eigs) if eigs else None,
        "rows": [row.to_dict() for row in table],
        "strictly_increasing": all(b > a for a, b in zip(values, values[1:])),
        "all_below_one": all(v < 1.0 for v in values),
    }
    rows = [[row.n, row.enumerated, "" if row.closed_form is None else row.closed_form] for row in table]
    return CommandResult(payload, csv_header=("n", "h2_enumerated", "h2_closed_form"), csv_rows=rows)
