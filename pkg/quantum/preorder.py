# quantum/preorder.py
# Post-processing preorder A <= B decided by LP feasibility over Markov kernels,
# equivalence, Hellinger non-equivalence witnesses, and saturation steps of instruments.

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import DimMismatchError, LPNumericalFailure, OutOfRangeError
from core.settings import Tolerances, tolerances
from quantum.asymptotics import hellinger_sq
from quantum.instrument import Instrument, repeated_observable
from quantum.kernel import MarkovKernel, label_to_json
from quantum.linalg import is_projection, max_norm
from quantum.povm import (
    Povm,
    StateVector,
    canonical_groups,
    outcome_distribution,
    require_effect,
    require_valid,
)
from quantum.simplex import solve_lp

logger = logging.getLogger(__name__)


# ================== TYPES ==================

@dataclass
class PreorderCertificate:
    """
    holds=True: `kernel` maps B's labels to A's labels and reproduces A within `residual`.
    holds=False: `gap` is the smallest achievable L-infinity residual (the LP optimum).
    """

    holds: bool
    kernel: Optional[MarkovKernel] = None
    residual: float = 0.0
    gap: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        if self.holds:
            return {"verdict": "Holds", "residual": self.residual, "kernel": self.kernel.to_dict()}
        return {"verdict": "Fails", "gap": self.gap}


@dataclass
class EquivalenceResult:
    equivalent: bool
    forward: PreorderCertificate   # A <= B
    backward: PreorderCertificate  # B <= A

    def to_dict(self) -> Dict[str, Any]:
        return {
            "equivalent": self.equivalent,
            "a_preceq_b": self.forward.to_dict(),
            "b_preceq_a": self.backward.to_dict(),
        }


@dataclass
class HellingerWitness:
    psi1: StateVector
    psi2: StateVector
    h2_a: float
    h2_b: float

    @property
    def gap(self) -> float:
        return abs(self.h2_a - self.h2_b)

    def to_dict(self) -> Dict[str, Any]:
        return {"h2_a": self.h2_a, "h2_b": self.h2_b, "gap": self.gap}


@dataclass
class LevelCertificate:
    level: int           # tests A_{level+1} <= A_level
    outcomes_n: int      # canonical outcome count of A_level
    outcomes_next: int   # canonical outcome count of A_{level+1}
    certificate: PreorderCertificate

    def to_dict(self) -> Dict[str, Any]:
        cert = self.certificate
        return {
            "level": self.level,
            "outcomes_n": self.outcomes_n,
            "outcomes_next": self.outcomes_next,
            "holds": cert.holds,
            "residual" if cert.holds else "gap": cert.residual if cert.holds else cert.gap,
        }


@dataclass
class SaturationReport:
    """verdict "Finite" with n = sat(I), or "ExceededCap" with n = n_max (all examined levels strict)."""

    verdict: str
    n: int
    chain: List[LevelCertificate] = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return self.verdict == "Finite"

    def to_dict(self) -> Dict[str, Any]:
        return {"verdict": self.verdict, "n": self.n, "chain": [c.to_dict() for c in self.chain]}


# ================== LP ==================

def _entry_coordinates(dim: int) -> List[Tuple[int, int, bool]]:
    """(i, j, imaginary?) over the upper triangle; diagonals only carry a real part."""
    coords = []
    for i in range(dim):
        for j in range(i, dim):
            coords.append((i, j, False))
            if i < j:
                coords.append((i, j, True))
    return coords


def _real_features(P: Povm, coords: List[Tuple[int, int, bool]]) -> np.ndarray:
    """Matrix [outcome, coordinate] of real numbers describing each effect."""
    out = np.zeros((len(P), len(coords)))
    for k, E in enumerate(P.effects):
        for c, (i, j, imag) in enumerate(coords):
            out[k, c] = E[i, j].imag if imag else E[i, j].real
    return out


def _kernel_lp(A: Povm, B: Povm) -> Tuple[float, np.ndarray]:
    """
    minimize t  s.t.  -t <= A(a)_c - sum_b kappa(a|b) B(b)_c <= t,  kappa >= 0,  sum_a kappa(a|b) = 1.

    The last target row of kappa is eliminated through the column sums and t is written as
    t0 - u, t0 being the residual of the kernel that sends every outcome to the last target.
    kappa' = 0, u = 0 is then a vertex with nonnegative right-hand sides, so the solver
    starts feasible. Returns (L-infinity residual of the kernel found, kappa[a, b]).
    """
    coords = _entry_coordinates(A.dim)
    fa = _real_features(A, coords)  # (nA, C)
    fb = _real_features(B, coords)  # (nB, C)
    nA, nB, C = len(A), len(B), len(coords)
    last = nA - 1
    n_free = last * nB  # kappa(a|b) for a < last, row-major (a, b), then u

    # residual(a) = base(a) + G(a) kappa'
    base = fa.copy()
    base[last] -= fb.sum(axis=0)
    t0 = float(np.abs(base).max())
    G = np.zeros((nA, C, n_free))
    for a in range(last):
        G[a, :, a * nB:(a + 1) * nB] = -fb.T
    G[last] = np.tile(fb.T, (1, last))
    G = G.reshape(nA * C, n_free)
    base = base.reshape(nA * C)

    n_vars = n_free + 1
    A_ub = np.zeros((2 * nA * C + nB, n_vars))
    b_ub = np.zeros(2 * nA * C + nB)
    # residual <= t0 - u  and  -residual <= t0 - u
    A_ub[:nA * C, :n_free] = G
    A_ub[nA * C:2 * nA * C, :n_free] = -G
    A_ub[:2 * nA * C, -1] = 1.0
    b_ub[:nA * C] = t0 - base
    b_ub[nA * C:2 * nA * C] = t0 + base
    # sum_{a < last} kappa(a|b) <= 1
    for b in range(nB):
        A_ub[2 * nA * C + b, b:n_free:nB] = 1.0
    b_ub[2 * nA * C:] = 1.0

    cost = np.zeros(n_vars)
    cost[-1] = -1.0
    res = solve_lp(cost, A_ub, np.maximum(b_ub, 0.0))
    if res.status != "optimal":
        raise LPNumericalFailure(f"kernel LP ended with status '{res.status}'")

    kappa = np.zeros((nA, nB))
    kappa[:last] = res.x[:n_free].reshape(last, nB)
    kappa[last] = 1.0 - kappa[:last].sum(axis=0)
    kappa = np.clip(kappa, 0.0, None)
    kappa = kappa / kappa.sum(axis=0)
    return max_norm(fa - kappa @ fb), kappa


def _lift_kernel(
    A: Povm,
    groups_a: List[List[int]],
    canon_a: Povm,
    B: Povm,
    groups_b: List[List[int]],
    kappa: np.ndarray,
) -> MarkovKernel:
    """
    Express a kernel between canonical forms over the original labels: merged targets are
    split by trace share, zero targets get zero rows, zero sources send all mass to the
    first target.
    """
    K = np.zeros((len(A), len(B)))
    share = np.zeros((len(A), len(groups_a)))
    for g, members in enumerate(groups_a):
        total = float(np.trace(canon_a.effects[g]).real)
        for i in members:
            share[i, g] = float(np.trace(A.effects[i]).real) / total if total > 0 else 1.0 / len(members)
    lifted = share @ kappa  # (len(A), len(canon B))
    covered = set()
    for g, members in enumerate(groups_b):
        for j in members:
            K[:, j] = lifted[:, g]
            covered.add(j)
    for j in range(len(B)):
        if j not in covered:
            K[0, j] = 1.0
    return MarkovKernel(B.labels, A.labels, K)


def kernel_residual(K: MarkovKernel, A: Povm, B: Povm) -> float:
    """max_a ||A(a) - sum_b K(a|b) B(b)||_max."""
    stack = np.stack(B.effects)
    approx = np.tensordot(K.matrix, stack, axes=(1, 0))
    return max(max_norm(E - F) for E, F in zip(A.effects, approx))


# ================== OPERATIONS ==================

def preceq(A: Povm, B: Povm, tols: Tolerances = tolerances) -> PreorderCertificate:
    """
    Decide A <= B (A is a post-processing of B). Both are canonicalized before the LP;
    a Holds certificate carries a kernel over the original labels.
    """
    if A.dim != B.dim:
        raise DimMismatchError(f"dims differ: {A.dim} vs {B.dim}")
    require_valid(A, tols)
    require_valid(B, tols)

    canon_a, groups_a = canonical_groups(A, tols)
    canon_b, groups_b = canonical_groups(B, tols)
    optimum, kappa = _kernel_lp(canon_a, canon_b)

    if optimum > tols.feas_tol:
        logger.debug("preceq: fails, gap %.3e (%d <- %d outcomes)", optimum, len(canon_a), len(canon_b))
        return PreorderCertificate(holds=False, gap=optimum)

    K = _lift_kernel(A, groups_a, canon_a, B, groups_b, kappa)
    residual = kernel_residual(K, A, B)
    if residual > tols.feas_tol:
        # lifting lost accuracy beyond tolerance; report the honest residual as a failure
        logger.warning("preceq: LP optimum %.3e but lifted residual %.3e", optimum, residual)
        return PreorderCertificate(holds=False, gap=residual)
    logger.debug("preceq: holds, residual %.3e", residual)
    return PreorderCertificate(holds=True, kernel=K, residual=residual)


def equivalent(A: Povm, B: Povm, tols: Tolerances = tolerances) -> EquivalenceResult:
    """A ~ B iff A <= B and B <= A."""
    forward = preceq(A, B, tols)
    backward = preceq(B, A, tols)
    return EquivalenceResult(forward.holds and backward.holds, forward, backward)


def strictly_preceq(A: Povm, B: Povm, tols: Tolerances = tolerances) -> bool:
    """A < B: A <= B but not B <= A."""
    return preceq(A, B, tols).holds and not preceq(B, A, tols).holds


def hellinger_witness(
    A: Povm,
    B: Povm,
    psi1: StateVector,
    psi2: StateVector,
    tols: Tolerances = tolerances,
) -> Optional[HellingerWitness]:
    """
    Equivalent observables give equal Hellinger distances between the outcome laws of any
    two states. A difference above witness_tol certifies A !~ B; None never means A ~ B.
    """
    h_a = hellinger_sq(outcome_distribution(A, psi1, tols), outcome_distribution(A, psi2, tols), tols)
    h_b = hellinger_sq(outcome_distribution(B, psi1, tols), outcome_distribution(B, psi2, tols), tols)
    if abs(h_a - h_b) > tols.witness_tol:
        return HellingerWitness(psi1, psi2, h_a, h_b)
    return None


def saturation_step(I: Instrument, n_max: int, tols: Tolerances = tolerances) -> SaturationReport:
    """
    Smallest n with A_{n+1} <= A_n (the converse always holds), tested for n = 1..n_max.
    Once a level holds every later level does too, so the first success is sat(I).
    """
    if n_max < 1:
        raise OutOfRangeError(f"n_max must be >= 1, got {n_max}")

    current, _ = canonical_groups(repeated_observable(I, 1, tols), tols)
    chain: List[LevelCertificate] = []
    for n in range(1, n_max + 1):
        nxt, _ = canonical_groups(repeated_observable(I, n + 1, tols), tols)
        cert = preceq(nxt, current, tols)
        chain.append(LevelCertificate(n, len(current), len(nxt), cert))
        logger.info(
            "saturation level %d: A_%d (%d outcomes) <= A_%d (%d outcomes) %s",
            n, n + 1, len(nxt), n, len(current),
            "holds" if cert.holds else f"fails (gap {cert.gap:.3e})",
        )
        if cert.holds:
            return SaturationReport("Finite", n, chain)
        current = nxt
    return SaturationReport("ExceededCap", n_max, chain)


def luders_saturation_class(A, tols: Tolerances = tolerances) -> float:
    """
    Closed-form saturation step of the Lüders instrument of an effect A:
    1 if A is a projection or a multiple of the identity, infinity otherwise.
    """
    A = require_effect(A, tols)
    if is_projection(A, tols.struct_tol, tols):
        return 1
    scalar = float(np.trace(A).real) / A.shape[0]
    if max_norm(A - scalar * np.eye(A.shape[0])) <= tols.struct_tol:
        return 1
    return math.inf


def sat_to_json(value: float) -> Any:
    return "inf" if value == math.inf else int(value)


def labels_to_json(P: Povm) -> List[Any]:
    return [label_to_json(x) for x in P.labels]
