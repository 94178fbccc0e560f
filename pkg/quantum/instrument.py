# quantum/instrument.py
# Kraus-operator instruments (Heisenberg picture): action, composition, derived & repeated
# observables, and the named constructions (Lüders, ladder, preparative, mixture, repeatable).
#
# Convention: I_omega(T) = sum_k K_k^dagger T K_k.  Composition I o J applies I to the
# state first, so the Kraus operators of outcome (omega, omega') are K^J_l K^I_k.

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Hashable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

from core.errors import (
    BadDimensionError,
    CapExceededError,
    DimMismatchError,
    LabelMismatchError,
    NotEffectError,
    ObservableMismatchError,
    OutOfRangeError,
    PartialMapError,
    UnknownOutcomeError,
)
from core.settings import Tolerances, tolerances
from quantum.kernel import labels_match
from quantum.linalg import as_matrix, eigh, max_norm, sqrt_psd
from quantum.povm import (
    DensityMatrix,
    Povm,
    ValidationReport,
    Violation,
    is_sharp,
    require_effect,
    require_valid,
)

logger = logging.getLogger(__name__)

Label = Hashable


@dataclass(frozen=True, eq=False)
class Instrument:
    """Ordered (label, Kraus list) pairs; every Kraus matrix is dim x dim."""

    labels: Tuple[Label, ...]
    kraus: Tuple[Tuple[np.ndarray, ...], ...]

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if len(labels) != len(self.kraus):
            raise LabelMismatchError(f"{len(labels)} labels for {len(self.kraus)} Kraus lists")
        if not labels:
            raise DimMismatchError("an instrument needs at least one outcome")
        kraus = []
        dims = set()
        for lab, ops in zip(labels, self.kraus):
            ops = tuple(ops)
            if not ops:
                raise DimMismatchError(f"outcome {lab!r} has an empty Kraus list")
            frozen = []
            for K in ops:
                arr = as_matrix(K)
                arr.flags.writeable = False
                dims.add(arr.shape[0])
                frozen.append(arr)
            kraus.append(tuple(frozen))
        if len(dims) != 1:
            raise DimMismatchError(f"Kraus operators have different dimensions: {sorted(dims)}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "kraus", tuple(kraus))

    @property
    def dim(self) -> int:
        return self.kraus[0][0].shape[0]

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[Tuple[Label, Tuple[np.ndarray, ...]]]:
        return iter(zip(self.labels, self.kraus))

    def kraus_of(self, label: Label) -> Tuple[np.ndarray, ...]:
        try:
            return self.kraus[self.labels.index(label)]
        except ValueError:
            raise UnknownOutcomeError(f"{label!r} is not an outcome of this instrument") from None


# ================== VALIDATION & ACTION ==================

def normalization_residual(I: Instrument) -> float:
    total = sum(K.conj().T @ K for _, ops in I for K in ops)
    return max_norm(total - np.eye(I.dim))


def validate(I: Instrument, tols: Tolerances = tolerances) -> ValidationReport:
    """Normalization sum_omega sum_k K^dagger K = 1 within struct_tol; distinct labels."""
    report = ValidationReport()
    seen: List[Label] = []
    for lab in I.labels:
        if lab in seen:
            report.violations.append(Violation(lab, "duplicate label", 0.0))
        seen.append(lab)
    res = normalization_residual(I)
    if res > tols.struct_tol:
        report.violations.append(Violation(None, "normalization residual", res))
    return report


def require_valid_instrument(I: Instrument, tols: Tolerances = tolerances) -> None:
    report = validate(I, tols)
    if not report.ok:
        raise NotEffectError(f"invalid instrument: {report.describe()}")


def _check_dim(I: Instrument, T: np.ndarray) -> np.ndarray:
    arr = np.asarray(T, dtype=complex)
    if arr.shape != (I.dim, I.dim):
        raise DimMismatchError(f"operator shape {arr.shape} vs instrument dim {I.dim}")
    return arr


def apply(I: Instrument, omega: Label, T) -> np.ndarray:
    """Heisenberg action I_omega(T) = sum_k K^dagger T K."""
    ops = I.kraus_of(omega)
    T = _check_dim(I, T)
    out = np.zeros((I.dim, I.dim), dtype=complex)
    for K in ops:
        out += K.conj().T @ T @ K
    return out


def apply_schrodinger(I: Instrument, omega: Label, rho) -> np.ndarray:
    """Unnormalized post-measurement state sum_k K rho K^dagger."""
    ops = I.kraus_of(omega)
    rho = _check_dim(I, rho)
    out = np.zeros((I.dim, I.dim), dtype=complex)
    for K in ops:
        out += K @ rho @ K.conj().T
    return out


def derived_observable(I: Instrument) -> Povm:
    """A^I(omega) = I_omega(1)."""
    ident = np.eye(I.dim, dtype=complex)
    return Povm(I.labels, tuple(apply(I, lab, ident) for lab in I.labels))


def compose(I: Instrument, J: Instrument) -> Instrument:
    """
    Outcomes (omega, omega'); Heisenberg action I_omega o J_omega' (I acts on the state first).
    Zero Kraus products are kept.
    """
    if I.dim != J.dim:
        raise DimMismatchError(f"dims differ: {I.dim} vs {J.dim}")
    labels = []
    kraus = []
    for a, ops_i in I:
        for b, ops_j in J:
            labels.append((a, b))
            kraus.append(tuple(Kj @ Ki for Ki in ops_i for Kj in ops_j))
    return Instrument(tuple(labels), tuple(kraus))


def repeated_observable(I: Instrument, n: int, tols: Tolerances = tolerances) -> Povm:
    """
    A_n(omega_1, ..., omega_n) = I_omega_1 o ... o I_omega_n (1), built by the recursion
    A_{k+1}(omega_1, rest) = I_omega_1(A_k(rest)). Labels are n-tuples in lexicographic
    order of the instrument's label order. No canonicalization.
    """
    if n < 1:
        raise OutOfRangeError(f"n must be >= 1, got {n}")
    required = len(I) ** n
    if required > tols.enumeration_cap:
        raise CapExceededError(required, tols.enumeration_cap)

    ident = np.eye(I.dim, dtype=complex)
    level: List[Tuple[Tuple[Label, ...], np.ndarray]] = [((lab,), apply(I, lab, ident)) for lab in I.labels]
    for _ in range(n - 1):
        level = [
            ((lab,) + rest, apply(I, lab, E))
            for lab in I.labels
            for rest, E in level
        ]
    return Povm(tuple(lab for lab, _ in level), tuple(E for _, E in level))


def marginal_residual(I: Instrument, n: int, tols: Tolerances = tolerances) -> float:
    """Max deviation of sum over the last coordinate of A_{n+1} from A_n."""
    An = repeated_observable(I, n, tols)
    An1 = repeated_observable(I, n + 1, tols)
    sums: Dict[Tuple, np.ndarray] = {}
    for lab, E in An1:
        sums[lab[:-1]] = sums.get(lab[:-1], 0) + E
    return max(max_norm(sums[lab] - E) for lab, E in An)


def is_repeatable(I: Instrument, tols: Tolerances = tolerances) -> bool:
    """I_a o I_b (1) = delta_ab I_a(1) for all outcome pairs, within struct_tol."""
    A = derived_observable(I)
    for a in I.labels:
        for b, Eb in A:
            lhs = apply(I, a, Eb)
            rhs = A.effect(a) if a == b else np.zeros_like(Eb)
            if max_norm(lhs - rhs) > tols.struct_tol:
                return False
    return True


# ================== CONSTRUCTORS ==================

def trivial(dim: int) -> Instrument:
    """Single outcome, Kraus [1]: the unit of compose."""
    return Instrument((0,), ((np.eye(dim, dtype=complex),),))


def luders_binary(A, tols: Tolerances = tolerances) -> Instrument:
    """Lüders instrument of the two-outcome observable {1 - A, A}: Kraus sqrt(1 - A), sqrt(A)."""
    A = require_effect(A, tols)
    ident = np.eye(A.shape[0], dtype=complex)
    return Instrument((0, 1), ((sqrt_psd(ident - A, tols),), (sqrt_psd(A, tols),)))


def ladder(d: int) -> Instrument:
    """
    Outcomes {0, 1} with L_0 = |phi_d><phi_d| and L_1 = sum_{k<d} |phi_{k+1}><phi_k|
    in the standard basis (phi_k = e_{k-1}).
    """
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
        raise BadDimensionError(f"ladder needs an integer d >= 2, got {d!r}")
    d = int(d)
    L0 = np.zeros((d, d), dtype=complex)
    L0[d - 1, d - 1] = 1.0
    L1 = np.zeros((d, d), dtype=complex)
    for k in range(1, d):
        L1[k, k - 1] = 1.0
    return Instrument((0, 1), ((L0,), (L1,)))


def ladder_sharp_observable(d: int, n: int) -> Povm:
    """
    The sharp observable equivalent to A_n of ladder(d).
    n <= d - 1: label 1 -> projection onto phi_1..phi_{d-n}; label j in 2..n+1 -> phi_{d-n+j-1}.
    n >= d - 1: label j -> phi_j for j in 1..d.
    """
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
        raise BadDimensionError(f"ladder needs an integer d >= 2, got {d!r}")
    if n < 1:
        raise OutOfRangeError(f"n must be >= 1, got {n}")
    basis = np.eye(d, dtype=complex)

    def proj(*ks: int) -> np.ndarray:
        # 1-based basis indices
        return sum(np.outer(basis[k - 1], basis[k - 1]) for k in ks)

    if n >= d - 1:
        return Povm(tuple(range(1, d + 1)), tuple(proj(j) for j in range(1, d + 1)))
    labels = [1] + list(range(2, n + 2))
    effects = [proj(*range(1, d - n + 1))] + [proj(d - n + j - 1) for j in range(2, n + 2)]
    return Povm(tuple(labels), tuple(effects))


def luders_closed_form(A, n: int, tols: Tolerances = tolerances) -> Povm:
    """A_n(omega) = A^{sum omega} (1 - A)^{n - sum omega} for the Lüders instrument of A."""
    A = require_effect(A, tols)
    if n < 1:
        raise OutOfRangeError(f"n must be >= 1, got {n}")
    required = 2 ** n
    if required > tols.enumeration_cap:
        raise CapExceededError(required, tols.enumeration_cap)
    comp = np.eye(A.shape[0], dtype=complex) - A
    labels = list(itertools.product((0, 1), repeat=n))
    effects = [
        np.linalg.matrix_power(A, sum(w)) @ np.linalg.matrix_power(comp, n - sum(w))
        for w in labels
    ]
    return Povm(tuple(labels), tuple(effects))


def repeatable(P: Povm, tols: Tolerances = tolerances) -> Instrument:
    """Von Neumann instrument of a sharp observable: Kraus [P(omega)]."""
    require_valid(P, tols)
    if not is_sharp(P, tols):
        raise NotEffectError("repeatable instrument needs a sharp observable")
    return Instrument(P.labels, tuple((E,) for E in P.effects))


def preparative(
    A: Povm,
    states: Mapping[Label, DensityMatrix],
    tols: Tolerances = tolerances,
) -> Instrument:
    """
    Measure A, then prepare eta_omega: I_omega(T) = tr[eta_omega T] A(omega).

    Kraus operators sqrt(p_i) |e_i><m| sqrt(A(omega)) over the eigenpairs (p_i, e_i) of
    eta_omega with p_i > 0 and the standard basis vectors m.
    """
    require_valid(A, tols)
    basis = np.eye(A.dim, dtype=complex)
    kraus = []
    for lab, E in A:
        if lab not in states:
            raise PartialMapError(f"no prepared state for outcome {lab!r}")
        eta = states[lab]
        if eta.dim != A.dim:
            raise DimMismatchError(f"state dim {eta.dim} != POVM dim {A.dim}")
        root = sqrt_psd(E, tols)
        probs, vecs = eigh(eta.matrix, tols)
        ops = []
        for p, e in zip(probs, vecs.T):
            if p <= tols.psd_tol:
                continue
            for m in basis:
                ops.append(math.sqrt(p) * np.outer(e, m.conj()) @ root)
        kraus.append(tuple(ops))
    return Instrument(A.labels, tuple(kraus))


def mixture(I: Instrument, J: Instrument, t: float, tols: Tolerances = tolerances) -> Instrument:
    """
    Convex mixture tI + (1-t)J of two instruments measuring the same observable:
    Kraus lists {sqrt(t) K : K in I_omega} + {sqrt(1-t) K : K in J_omega}.
    """
    if not 0.0 <= t <= 1.0:
        raise OutOfRangeError(f"mixture weight t must be in [0, 1], got {t}")
    if I.dim != J.dim:
        raise DimMismatchError(f"dims differ: {I.dim} vs {J.dim}")
    if not labels_match(I.labels, J.labels, tols.cluster_tol):
        raise ObservableMismatchError("instruments have different outcome labels")
    AI = derived_observable(I)
    AJ = derived_observable(J)
    gap = max(max_norm(E - F) for E, F in zip(AI.effects, AJ.effects))
    if gap > tols.struct_tol:
        raise ObservableMismatchError(f"derived observables differ by {gap:.3e}")
    wi, wj = math.sqrt(t), math.sqrt(1.0 - t)
    kraus = tuple(
        tuple(wi * K for K in ops_i) + tuple(wj * K for K in ops_j)
        for (_, ops_i), (_, ops_j) in zip(I, J)
    )
    return Instrument(I.labels, kraus)


def is_binary(I: Instrument) -> bool:
    return set(I.labels) == {0, 1}


def hermitian_basis(dim: int) -> List[np.ndarray]:
    """Real basis of the Hermitian dim x dim matrices (used to compare instrument actions)."""
    out: List[np.ndarray] = []
    for i in range(dim):
        M = np.zeros((dim, dim), dtype=complex)
        M[i, i] = 1.0
        out.append(M)
    for i in range(dim):
        for j in range(i + 1, dim):
            M = np.zeros((dim, dim), dtype=complex)
            M[i, j] = M[j, i] = 1.0
            out.append(M)
            M = np.zeros((dim, dim), dtype=complex)
            M[i, j] = -1j
            M[j, i] = 1j
            out.append(M)
    return out


def action_distance(I: Instrument, J: Instrument, label_map: Sequence[Tuple[Label, Label]] = ()) -> float:
    """
    Max-norm distance between the actions of I and J on a Hermitian basis.
    label_map pairs outcomes of I with outcomes of J; default pairs equal labels.
    """
    if I.dim != J.dim:
        raise DimMismatchError(f"dims differ: {I.dim} vs {J.dim}")
    pairs = list(label_map) or [(lab, lab) for lab in I.labels]
    worst = 0.0
    for T in hermitian_basis(I.dim):
        for a, b in pairs:
            worst = max(worst, max_norm(apply(I, a, T) - apply(J, b, T)))
    return worst
