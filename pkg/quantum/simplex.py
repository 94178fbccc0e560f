# quantum/simplex.py
# Dense two-phase tableau simplex:
#   minimize c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
# Rows are scaled to unit max-norm; the tableau is rebuilt from the original data every
# few pivots and before an optimum is accepted.

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from core.errors import LPNumericalFailure

logger = logging.getLogger(__name__)

# reduced costs above -_COST_TOL count as nonnegative
_COST_TOL = 1e-10
# smallest pivot element accepted (rows have max-norm 1)
_PIVOT_TOL = 1e-9
# phase-1 optimum above this (relative to the largest rhs) means infeasible
_FEAS_TOL = 1e-9
# pivots between tableau rebuilds
_REFACTOR_EVERY = 40
# consecutive degenerate pivots before falling back to Bland's rule
_STALL_LIMIT = 25


@dataclass
class LPResult:
    status: str                 # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int


class _Tableau:
    """
    Standard-form tableau over the constraint matrix `A` (slacks and artificials included)
    with the reduced-cost row last and -objective in the bottom-right corner.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: List[int], cost: np.ndarray):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.cost = cost
        self.T = np.zeros((A.shape[0] + 1, A.shape[1] + 1))
        if not self.rebuild():
            raise LPNumericalFailure("starting basis is singular")

    @property
    def rows(self) -> int:
        return len(self.basis)

    def rebuild(self) -> bool:
        m, N = self.A.shape
        T = np.zeros((m + 1, N + 1))
        T[-1, :N] = self.cost
        if m:
            Bm = self.A[:, self.basis]
            try:
                T[:m] = np.linalg.solve(Bm, np.column_stack([self.A, self.b]))
                y = np.linalg.solve(Bm.T, self.cost[self.basis])
            except np.linalg.LinAlgError:
                logger.debug("simplex: basis singular on rebuild, keeping the running tableau")
                return False
            T[-1, :N] -= self.A.T @ y
            T[-1, -1] = -float(y @ self.b)
            T[:m, self.basis] = np.eye(m)
            T[-1, self.basis] = 0.0
            low = float(T[:m, -1].min())
            if low < -1e-7:
                logger.debug("simplex: rebuilt basis infeasible by %.3e", -low)
            np.maximum(T[:m, -1], 0.0, out=T[:m, -1])
        self.T = T
        return True

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col

    def entering(self, allowed: int, bland: bool) -> int:
        reduced = self.T[-1, :allowed]
        neg = np.nonzero(reduced < -_COST_TOL)[0]
        if neg.size == 0:
            return -1
        if bland:
            return int(neg[0])
        return int(neg[np.argmin(reduced[neg])])

    def leaving(self, col: int, bland: bool) -> int:
        column = self.T[:self.rows, col]
        cand = np.nonzero(column > _PIVOT_TOL)[0]
        if cand.size == 0:
            return -1
        ratios = np.maximum(self.T[cand, -1], 0.0) / column[cand]
        best = float(ratios.min())
        ties = cand[ratios <= best + 1e-12 * max(1.0, best)]
        if bland:
            return int(min(ties, key=lambda i: self.basis[i]))
        # largest pivot element among the tied rows
        return int(ties[np.argmax(column[ties])])

    def run(self, allowed: int, cap: int) -> Tuple[str, int]:
        it = since = stall = 0
        while True:
            bland = stall >= _STALL_LIMIT
            j = self.entering(allowed, bland)
            if j == -1:
                if since and self.rebuild():
                    since = 0
                    continue
                return "optimal", it
            i = self.leaving(j, bland)
            if i == -1:
                return "unbounded", it
            if it >= cap:
                raise LPNumericalFailure(f"simplex hit the iteration cap ({cap})")
            stall = stall + 1 if self.T[i, -1] <= _PIVOT_TOL else 0
            self.pivot(i, j)
            it += 1
            since += 1
            if since >= _REFACTOR_EVERY and self.rebuild():
                since = 0

    def solution(self, n: int) -> np.ndarray:
        x = np.zeros(self.A.shape[1])
        x[self.basis] = self.T[:self.rows, -1]
        return np.clip(x[:n], 0.0, None)


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    max_iter: Optional[int] = None,
) -> LPResult:
    """
    Phase 1 minimizes the sum of artificial variables from the slack/artificial basis;
    phase 2 minimizes c^T x from the feasible basis it leaves, on a tableau rebuilt
    without the artificial columns. Iteration cap defaults to 10 * (columns + rows)
    over both phases.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # --- unit max-norm rows with nonnegative right-hand sides ---
    rows = np.vstack([A_ub, A_eq])
    rhs = np.concatenate([b_ub, b_eq])
    scale = np.abs(rows).max(axis=1, initial=0.0)
    scale[scale == 0.0] = 1.0
    rows = rows / scale[:, None]
    rhs = rhs / scale
    slack_sign = np.ones(m_ub)
    flip = rhs < 0
    rows[flip] *= -1.0
    rhs[flip] *= -1.0
    slack_sign[flip[:m_ub]] = -1.0

    # artificial variable for every row that has no +1 slack to start the basis
    needs_art = np.concatenate([flip[:m_ub], np.ones(m_eq, dtype=bool)])
    art_rows = np.nonzero(needs_art)[0]
    n_art = art_rows.size
    n_real = n + m_ub
    n_cols = n_real + n_art

    A = np.zeros((m, n_cols))
    A[:, :n] = rows
    A[np.arange(m_ub), n + np.arange(m_ub)] = slack_sign
    basis: List[int] = [n + i for i in range(m)]
    for k, r in enumerate(art_rows):
        A[r, n_real + k] = 1.0
        basis[r] = n_real + k

    cap = max_iter if max_iter is not None else 10 * (n_cols + m)
    iterations = 0

    # --- phase 1 ---
    if n_art:
        cost1 = np.zeros(n_cols)
        cost1[n_real:] = 1.0
        tab = _Tableau(A, rhs, basis, cost1)
        _, it = tab.run(n_cols, cap)
        iterations += it
        if -tab.T[-1, -1] > _FEAS_TOL * max(1.0, float(rhs.max(initial=0.0))):
            logger.debug("simplex: infeasible (phase-1 optimum %.3e)", -tab.T[-1, -1])
            return LPResult("infeasible", None, None, iterations)

        # drive artificial variables at zero level out of the basis
        for r in range(tab.rows):
            if tab.basis[r] >= n_real:
                row = np.abs(tab.T[r, :n_real])
                j = int(np.argmax(row)) if n_real else -1
                if j >= 0 and row[j] > _PIVOT_TOL:
                    tab.T[r, -1] = 0.0
                    tab.pivot(r, j)
                # else: redundant row, dropped below
        keep = [r for r in range(tab.rows) if tab.basis[r] < n_real]
        A = A[keep][:, :n_real]
        rhs = rhs[keep]
        basis = [tab.basis[r] for r in keep]

    # --- phase 2 ---
    cost2 = np.zeros(n_real)
    cost2[:n] = c
    tab = _Tableau(A, rhs, basis, cost2)
    status, it = tab.run(n_real, max(cap - iterations, 0))
    iterations += it
    if status == "unbounded":
        return LPResult("unbounded", None, None, iterations)

    x = tab.solution(n)
    logger.debug("simplex: optimal after %d pivots, objective %.3e", iterations, float(c @ x))
    return LPResult("optimal", x, float(c @ x), iterations)
