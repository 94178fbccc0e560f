# quantum/asymptotics.py
# Large-n behaviour of repeated measurements: Monte Carlo trajectories, empirical
# frequencies, spectral-mass estimates and Hellinger distances (enumerated and closed form).

import itertools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Any, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_BINS
from core.errors import (
    AtomsTooCloseError,
    DimMismatchError,
    NonBinaryLabelsError,
    NotNormalizedError,
    NumericalUnderflow,
    OutOfRangeError,
)
from core.settings import Tolerances, tolerances
from quantum.instrument import Instrument, is_binary, repeated_observable, require_valid_instrument
from quantum.linalg import spectral_clusters
from quantum.povm import DensityMatrix, StateVector, outcome_distribution, require_effect

logger = logging.getLogger(__name__)

Label = Hashable

# post-measurement traces below this are renormalized with a NumericalUnderflow warning
_UNDERFLOW_TRACE = 1e-12


# ================== TYPES ==================

@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """
    n_traj independent measurement sequences of length n_steps.
    `outcomes[t, k]` indexes into `labels`; `frequencies` is X_n = mean outcome per
    trajectory, set only for {0, 1}-labelled instruments with n_steps > 0.
    """

    instrument: Instrument
    initial_state: DensityMatrix
    n_steps: int
    n_traj: int
    seed: int
    labels: Tuple[Label, ...]
    outcomes: np.ndarray
    frequencies: Optional[np.ndarray]

    def outcome_values(self) -> np.ndarray:
        """n_traj x n_steps array of the (numeric) binary labels."""
        if not is_binary(self.instrument):
            raise NonBinaryLabelsError(f"labels {self.labels!r} are not {{0, 1}}")
        values = np.array([float(lab) for lab in self.labels])
        return values[self.outcomes]


@dataclass
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    counts: np.ndarray

    def mode_bin(self) -> Tuple[float, float]:
        k = int(np.argmax(self.masses))
        return float(self.edges[k]), float(self.edges[k + 1])

    def mass_between(self, lo: float, hi: float) -> float:
        """Total mass of bins lying entirely inside [lo, hi]."""
        inside = (self.edges[:-1] >= lo - 1e-12) & (self.edges[1:] <= hi + 1e-12)
        return float(self.masses[inside].sum())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "edges": self.edges.tolist(),
            "masses": self.masses.tolist(),
            "counts": self.counts.tolist(),
        }


@dataclass
class HellingerRow:
    n: int
    enumerated: float
    closed_form: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "h2_enumerated": self.enumerated, "h2_closed_form": self.closed_form}


# ================== TRAJECTORIES ==================

def _trajectory_uniforms(seed: int, n_traj: int, n_steps: int) -> np.ndarray:
    """One PCG64 stream per trajectory, keyed by (seed, index)."""
    out = np.empty((n_traj, n_steps))
    for t in range(n_traj):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        out[t] = rng.random(n_steps)
    return out


def sample_trajectories(
    I: Instrument,
    rho: DensityMatrix,
    n_steps: int,
    n_traj: int,
    seed: int,
    tols: Tolerances = tolerances,
) -> TrajectoryBatch:
    """
    Measure I repeatedly on rho. At each step outcome omega is drawn with probability
    tr[I_omega(rho)] for the current state, which then becomes I_omega(rho) / p(omega)
    (Schrödinger picture). Trajectories advance together, each consuming its own stream,
    so the batch only depends on (seed, index) per trajectory.
    """
    require_valid_instrument(I, tols)
    if rho.dim != I.dim:
        raise DimMismatchError(f"state dim {rho.dim} != instrument dim {I.dim}")
    if n_steps < 0 or n_traj < 0:
        raise OutOfRangeError(f"n_steps and n_traj must be >= 0, got {n_steps}, {n_traj}")
    if seed < 0:
        raise OutOfRangeError(f"seed must be a non-negative integer, got {seed}")

    uniforms = _trajectory_uniforms(seed, n_traj, n_steps)
    outcomes = np.zeros((n_traj, n_steps), dtype=np.int64)
    kraus = [np.stack(ops) for _, ops in I]
    states = np.array(np.broadcast_to(rho.matrix, (n_traj, I.dim, I.dim)), dtype=complex)
    rows = np.arange(n_traj)
    underflows = 0

    for step in range(n_steps if n_traj else 0):
        # posts[w, t] = sum_k K rho_t K^dagger for outcome w
        posts = np.stack([np.einsum("kij,tjl,kml->tim", K, states, K.conj()) for K in kraus])
        probs = np.clip(np.einsum("wtii->tw", posts).real, 0.0, None)
        cum = np.cumsum(probs, axis=1) / probs.sum(axis=1, keepdims=True)
        choice = (cum[:, :-1] <= uniforms[:, step:step + 1]).sum(axis=1)

        chosen_p = probs[rows, choice]
        stray = chosen_p <= 0.0
        if stray.any():
            # rounding at the top of the CDF; never follow a zero-probability branch
            choice[stray] = probs[stray].argmax(axis=1)
            chosen_p = probs[rows, choice]

        small = chosen_p < _UNDERFLOW_TRACE
        if small.any():
            underflows += int(small.sum())
        outcomes[:, step] = choice
        states = posts[choice, rows] / chosen_p[:, None, None]

    if underflows:
        msg = f"{underflows} post-measurement states had trace < {_UNDERFLOW_TRACE:g}; renormalized"
        logger.warning(msg)
        warnings.warn(msg, NumericalUnderflow, stacklevel=2)

    frequencies = None
    if is_binary(I) and n_steps > 0:
        values = np.array([float(lab) for lab in I.labels])
        frequencies = values[outcomes].mean(axis=1) if n_traj else np.zeros(0)

    logger.debug("sampled %d trajectories x %d steps (seed %d)", n_traj, n_steps, seed)
    return TrajectoryBatch(I, rho, n_steps, n_traj, seed, I.labels, outcomes, frequencies)


def _require_frequencies(batch: TrajectoryBatch) -> np.ndarray:
    if not is_binary(batch.instrument):
        raise NonBinaryLabelsError(f"labels {batch.labels!r} are not {{0, 1}}")
    if batch.frequencies is None:
        raise OutOfRangeError("frequencies need n_steps >= 1")
    return batch.frequencies


def step_means(batch: TrajectoryBatch) -> np.ndarray:
    """Sample mean of the binary outcome at each step, across trajectories."""
    values = batch.outcome_values()
    if batch.n_traj == 0:
        return np.full(batch.n_steps, np.nan)
    return values.mean(axis=0)


def frequency_histogram(
    batch: TrajectoryBatch,
    edges: Optional[Sequence[float]] = None,
    bins: int = DEFAULT_BINS,
) -> Histogram:
    """
    Histogram of X_{n_steps} over the batch. `edges` must ascend from 0 to 1;
    default is `bins` uniform bins. An empty batch gives all-zero masses.
    """
    freqs = _require_frequencies(batch)
    if edges is None:
        if bins < 1:
            raise OutOfRangeError(f"bins must be >= 1, got {bins}")
        edges_arr = np.linspace(0.0, 1.0, bins + 1)
    else:
        edges_arr = np.asarray(edges, dtype=float)
        if edges_arr.ndim != 1 or edges_arr.size < 2 or np.any(np.diff(edges_arr) <= 0):
            raise OutOfRangeError("histogram edges must be a strictly ascending array of length >= 2")
        if abs(edges_arr[0]) > 1e-12 or abs(edges_arr[-1] - 1.0) > 1e-12:
            raise OutOfRangeError(f"histogram edges must span [0, 1], got [{edges_arr[0]}, {edges_arr[-1]}]")

    counts, _ = np.histogram(freqs, bins=edges_arr)
    masses = counts / batch.n_traj if batch.n_traj else np.zeros(len(counts))
    return Histogram(edges_arr, masses, counts)


def estimate_spectral_masses(batch: TrajectoryBatch, A, tols: Tolerances = tolerances) -> Dict[float, float]:
    """
    Assign each trajectory's X_n to the nearest eigenvalue atom of A and return the
    fraction per atom, an estimate of tr[rho P^A(lambda)]. Atoms must be separated by
    more than 2 / sqrt(n_steps).
    """
    freqs = _require_frequencies(batch)
    A = require_effect(A, tols)
    atoms = np.array([lam for lam, _ in spectral_clusters(A, tols)])
    if atoms.size > 1:
        separation = float(np.min(np.diff(atoms)))
        needed = 2.0 / math.sqrt(batch.n_steps)
        if separation <= needed:
            raise AtomsTooCloseError(
                f"eigenvalue atoms {separation:.3e} apart, need > {needed:.3e} at n_steps={batch.n_steps}"
            )
    if batch.n_traj == 0:
        return {float(lam): 0.0 for lam in atoms}
    nearest = np.argmin(np.abs(freqs[:, None] - atoms[None, :]), axis=1)
    counts = np.bincount(nearest, minlength=atoms.size)
    return {float(lam): float(c) / batch.n_traj for lam, c in zip(atoms, counts)}


# ================== HELLINGER ==================

def hellinger_sq(
    p: Mapping[Label, float],
    q: Mapping[Label, float],
    tols: Tolerances = tolerances,
) -> float:
    """H^2(p, q) = 1 - sum sqrt(p q) over the union of labels (absent = 0), clamped to [0, 1]."""
    for name, dist in (("p", p), ("q", q)):
        total = float(sum(dist.values()))
        if abs(total - 1.0) > tols.sum_tol:
            raise NotNormalizedError(f"{name} sums to {total:.12f}")
    bc = 0.0
    for label in set(p) | set(q):
        bc += math.sqrt(max(p.get(label, 0.0), 0.0) * max(q.get(label, 0.0), 0.0))
    return min(max(1.0 - bc, 0.0), 1.0)


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise OutOfRangeError(f"{name} must be in [0, 1], got {value}")


def luders_hellinger_closed_form(lam1: float, lam2: float, n: int) -> float:
    """
    H^2 between the outcome laws of n repeated Lüders measurements on eigenvectors with
    eigenvalues lam1, lam2: 1 - (sqrt(lam1 lam2) + sqrt((1-lam1)(1-lam2)))^n.
    """
    _check_unit("lam1", lam1)
    _check_unit("lam2", lam2)
    if n < 0:
        raise OutOfRangeError(f"n must be >= 0, got {n}")
    base = math.sqrt(lam1 * lam2) + math.sqrt((1.0 - lam1) * (1.0 - lam2))
    return min(max(1.0 - base ** n, 0.0), 1.0)


def bernoulli_sequence_distribution(lam: float, n: int) -> Dict[Tuple[int, ...], float]:
    """i.i.d. Bernoulli(lam) law on {0,1}^n, keyed by outcome tuples."""
    _check_unit("lam", lam)
    if n < 1:
        raise OutOfRangeError(f"n must be >= 1, got {n}")
    return {
        w: lam ** sum(w) * (1.0 - lam) ** (n - sum(w))
        for w in itertools.product((0, 1), repeat=n)
    }


def hellinger_table(
    I: Instrument,
    n_list: Sequence[int],
    psi1: StateVector,
    psi2: StateVector,
    closed_form_eigs: Optional[Tuple[float, float]] = None,
    tols: Tolerances = tolerances,
) -> List[HellingerRow]:
    """
    For each n: H^2 between the A_n outcome laws of psi1 and psi2, by enumeration,
    next to the Lüders closed form when the eigenvalues of psi1, psi2 are given.
    """
    rows: List[HellingerRow] = []
    for n in n_list:
        An = repeated_observable(I, n, tols)
        h2 = hellinger_sq(outcome_distribution(An, psi1, tols), outcome_distribution(An, psi2, tols), tols)
        closed = None
        if closed_form_eigs is not None:
            closed = luders_hellinger_closed_form(closed_form_eigs[0], closed_form_eigs[1], n)
        rows.append(HellingerRow(int(n), h2, closed))
        logger.debug("hellinger n=%d: enumerated %.12f closed %s", n, h2, closed)
    return rows
