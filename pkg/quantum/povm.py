# quantum/povm.py
# Finite-outcome observables (POVMs), states, and the operations on them:
# validation, relabeling, kernel post-processing, canonicalization, spectral measures,
# outcome distributions.

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import (
    DimMismatchError,
    InvalidStateError,
    LabelMismatchError,
    NotEffectError,
)
from core.settings import Tolerances, tolerances
from quantum.kernel import MarkovKernel, apply_map, labels_match
from quantum.linalg import as_matrix, eigh, hermitian, is_projection, max_norm, spectral_clusters

logger = logging.getLogger(__name__)

Label = Hashable
ProbabilityMap = Dict[Label, float]

# unit-norm tolerance for state vectors and trace of density matrices
_STATE_TOL = 1e-10


# ================== TYPES ==================

@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered (label, effect) pairs. Construction only checks shapes; use validate() for the rest."""

    labels: Tuple[Label, ...]
    effects: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        effects = []
        for E in self.effects:
            arr = as_matrix(E)
            arr.flags.writeable = False
            effects.append(arr)
        if len(labels) != len(effects):
            raise LabelMismatchError(f"{len(labels)} labels for {len(effects)} effects")
        if not effects:
            raise DimMismatchError("a POVM needs at least one outcome")
        dims = {E.shape[0] for E in effects}
        if len(dims) != 1:
            raise DimMismatchError(f"effects have different dimensions: {sorted(dims)}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "effects", tuple(effects))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[Tuple[Label, np.ndarray]]:
        return iter(zip(self.labels, self.effects))

    def effect(self, label: Label) -> np.ndarray:
        return self.effects[self.labels.index(label)]


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, psi: StateVector) -> "DensityMatrix":
        v = psi.amplitudes
        mat = np.outer(v, v.conj())
        mat.flags.writeable = False
        return cls(mat)


@dataclass
class Violation:
    outcome: Optional[Label]
    kind: str
    residual: float


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(
            f"{v.kind} (outcome {v.outcome!r}, residual {v.residual:.3e})" for v in self.violations
        )


# ================== CONSTRUCTORS ==================

def state_vector(amplitudes, tols: Tolerances = tolerances) -> StateVector:
    """Validated unit vector. Never normalizes silently."""
    v = np.array(amplitudes, dtype=complex).reshape(-1)
    if v.size == 0:
        raise InvalidStateError("empty state vector")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > _STATE_TOL:
        raise InvalidStateError(f"state vector norm {norm:.12f} is not 1")
    v.flags.writeable = False
    return StateVector(v)


def density_matrix(matrix, tols: Tolerances = tolerances) -> DensityMatrix:
    """Validated density matrix: Hermitian, PSD, trace 1."""
    rho = hermitian(matrix, tols)
    evals, _ = eigh(rho, tols)
    if evals[0] < -tols.psd_tol:
        raise InvalidStateError(f"density matrix has eigenvalue {evals[0]:.3e} < 0")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > _STATE_TOL:
        raise InvalidStateError(f"density matrix trace {tr:.12f} is not 1")
    return DensityMatrix(rho)


def povm_from_effects(labels: Sequence[Label], effects: Sequence, tols: Tolerances = tolerances) -> Povm:
    """Build a Povm and raise NotEffectError if it does not validate."""
    P = Povm(tuple(labels), tuple(effects))
    report = validate(P, tols)
    if not report.ok:
        raise NotEffectError(f"invalid POVM: {report.describe()}")
    return P


def require_effect(A, tols: Tolerances = tolerances) -> np.ndarray:
    """Return A as a Hermitian matrix, raising NotEffectError unless 0 <= A <= 1 within psd_tol."""
    A = hermitian(A, tols)
    evals, _ = eigh(A, tols)
    if evals[0] < -tols.psd_tol or evals[-1] > 1.0 + tols.psd_tol:
        raise NotEffectError(f"spectrum [{evals[0]:.3e}, {evals[-1]:.3e}] is not inside [0, 1]")
    return A


def two_outcome(A, tols: Tolerances = tolerances) -> Povm:
    """The binary observable {0: 1 - A, 1: A} of an effect A."""
    A = require_effect(A, tols)
    ident = np.eye(A.shape[0], dtype=complex)
    return povm_from_effects((0, 1), (ident - A, A), tols)


# ================== OPERATIONS ==================

def effect_sum(P: Povm) -> np.ndarray:
    return np.sum(np.stack(P.effects), axis=0)


def validate(P: Povm, tols: Tolerances = tolerances) -> ValidationReport:
    """
    Check distinct labels, Hermitian PSD effects and completeness.
    Violations name the failing outcome and the residual magnitude.
    """
    report = ValidationReport()

    seen: List[Label] = []
    for lab in P.labels:
        if lab in seen:
            report.violations.append(Violation(lab, "duplicate label", 0.0))
        seen.append(lab)

    for lab, E in P:
        asym = max_norm(E - E.conj().T)
        if asym > tols.herm_tol:
            report.violations.append(Violation(lab, "effect not Hermitian", asym))
            continue
        evals, _ = eigh(E, tols)
        if evals[0] < -tols.psd_tol:
            report.violations.append(Violation(lab, "effect not PSD", float(-evals[0])))

    residual = max_norm(effect_sum(P) - np.eye(P.dim))
    if residual > tols.sum_tol:
        report.violations.append(Violation(None, "completeness residual", residual))

    return report


def relabel(
    P: Povm,
    f: Union[Mapping[Label, Label], Callable[[Label], Label]],
    tols: Tolerances = tolerances,
) -> Povm:
    """
    Post-process by a function on labels: the effect at a is the sum of P(omega) over f(omega) = a.
    Output labels keep first-appearance order.
    """
    targets: List[Label] = []
    sums: Dict[Label, np.ndarray] = {}
    for lab, E in P:
        img = apply_map(f, lab)
        if img not in sums:
            targets.append(img)
            sums[img] = np.zeros_like(E)
        sums[img] = sums[img] + E
    return Povm(tuple(targets), tuple(sums[t] for t in targets))


def apply_kernel(K: MarkovKernel, B: Povm, tols: Tolerances = tolerances) -> Povm:
    """A(omega) = sum_{omega'} K(omega | omega') B(omega')."""
    if not labels_match(K.source_labels, B.labels, tols.cluster_tol):
        raise LabelMismatchError("kernel source labels differ from the POVM labels")
    K.validate(tols)
    stack = np.stack(B.effects)
    out = np.tensordot(K.matrix, stack, axes=(1, 0))
    return Povm(K.target_labels, tuple(out))


def canonical_groups(P: Povm, tols: Tolerances = tolerances) -> Tuple[Povm, List[List[int]]]:
    """
    Canonical form plus, for each canonical outcome, the indices of the original
    outcomes merged into it. Zero effects belong to no group.
    """
    reps: List[np.ndarray] = []
    groups: List[List[int]] = []
    for i, E in enumerate(P.effects):
        if max_norm(E) <= tols.zero_tol:
            continue
        tr = float(np.trace(E).real)
        if tr <= 0.0:
            # not PSD; keep it on its own
            reps.append(np.full_like(E, np.nan))
            groups.append([i])
            continue
        normalized = E / tr
        for g, rep in enumerate(reps):
            if max_norm(normalized - rep) <= tols.prop_tol:
                groups[g].append(i)
                break
        else:
            reps.append(normalized)
            groups.append([i])

    if not groups:
        # only possible for an invalid POVM (all-zero); leave it alone
        return P, [[i] for i in range(len(P))]

    labels = tuple(P.labels[g[0]] for g in groups)
    effects = tuple(np.sum(np.stack([P.effects[i] for i in g]), axis=0) for g in groups)
    return Povm(labels, effects), groups


def canonicalize(P: Povm, tols: Tolerances = tolerances) -> Povm:
    """
    Drop zero effects and merge outcomes whose effects are positive multiples of each other.
    A merged outcome keeps the label of its first member. Result is equivalent to P.
    """
    canon, _ = canonical_groups(P, tols)
    return canon


def is_canonical(P: Povm, tols: Tolerances = tolerances) -> bool:
    _, groups = canonical_groups(P, tols)
    return len(groups) == len(P) and all(len(g) == 1 for g in groups)


def spectral_measure_of_effect(A, tols: Tolerances = tolerances) -> Povm:
    """
    Projection-valued measure of an effect: one outcome per clustered eigenvalue lambda,
    labeled by lambda, with the spectral projection as effect.
    """
    A = require_effect(A, tols)
    atoms = spectral_clusters(A, tols)
    return Povm(tuple(lam for lam, _ in atoms), tuple(P for _, P in atoms))


def _clamp_probability(raw: complex, label: Label, tols: Tolerances) -> float:
    val = float(np.real(raw))
    if abs(float(np.imag(raw))) > tols.prob_tol:
        logger.warning("outcome %r has imaginary probability part %.3e", label, float(np.imag(raw)))
    if val < -tols.prob_tol:
        logger.warning("outcome %r has negative probability %.3e, clamped", label, val)
    return min(max(val, 0.0), 1.0)


def outcome_distribution(P: Povm, psi: StateVector, tols: Tolerances = tolerances) -> ProbabilityMap:
    """Pi_psi(omega) = <psi|P(omega)|psi>, clamped to [0, 1]."""
    if psi.dim != P.dim:
        raise DimMismatchError(f"state dim {psi.dim} != POVM dim {P.dim}")
    v = psi.amplitudes
    return {lab: _clamp_probability(np.vdot(v, E @ v), lab, tols) for lab, E in P}


def outcome_distribution_rho(P: Povm, rho: DensityMatrix, tols: Tolerances = tolerances) -> ProbabilityMap:
    """tr[rho P(omega)], clamped to [0, 1]."""
    if rho.dim != P.dim:
        raise DimMismatchError(f"state dim {rho.dim} != POVM dim {P.dim}")
    return {lab: _clamp_probability(np.trace(rho.matrix @ E), lab, tols) for lab, E in P}


def is_sharp(P: Povm, tols: Tolerances = tolerances) -> bool:
    """Every effect is a projection within struct_tol."""
    return all(is_projection(E, tols.struct_tol, tols) for E in P.effects)


def povms_close(P: Povm, Q: Povm, tol: float, tols: Tolerances = tolerances) -> bool:
    """Same labels (in order) and effects equal within tol (max-norm)."""
    if not labels_match(P.labels, Q.labels, tols.cluster_tol) or P.dim != Q.dim:
        return False
    return all(max_norm(E - F) <= tol for E, F in zip(P.effects, Q.effects))


def require_valid(P: Povm, tols: Tolerances = tolerances) -> None:
    report = validate(P, tols)
    if not report.ok:
        raise NotEffectError(f"invalid POVM: {report.describe()}")
