# quantum/linalg.py
# Dense complex Hermitian linear algebra: cyclic Jacobi eigensolver, PSD square roots, PSD tests.
#
# Every other decomposition in the package (square roots, spectral measures, PSD checks)
# goes through eigh() below, so numeric behavior is controlled by one routine and one
# tolerance record (core.settings.Tolerances).

import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from core.errors import DimMismatchError, NonFiniteError, NonHermitianError, NoConvergenceError, NotPSDError
from core.settings import Tolerances, tolerances

logger = logging.getLogger(__name__)

# off-diagonal mass (relative to the Frobenius norm) below which a sweep counts as converged
_OFF_DIAG_REL = 1e-15
# absolute floor for skipping a rotation
_TINY = 1e-300


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # ascending, real
    eigenvectors: np.ndarray  # unitary, eigenvectors as columns


def as_matrix(M) -> np.ndarray:
    """Copy any array-like into a square, finite complex128 matrix."""
    arr = np.array(M, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimMismatchError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("matrix has non-finite entries")
    return arr


def max_norm(M) -> float:
    """Elementwise max-norm ||M||_max."""
    arr = np.asarray(M)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def hermitian(M, tols: Tolerances = tolerances) -> np.ndarray:
    """
    Validate Hermitian symmetry within herm_tol and return a read-only symmetrized copy.
    """
    arr = as_matrix(M)
    asym = max_norm(arr - arr.conj().T)
    if asym > tols.herm_tol:
        raise NonHermitianError(f"||M - M^dagger||_max = {asym:.3e} > {tols.herm_tol:.1e}")
    out = 0.5 * (arr + arr.conj().T)
    out.flags.writeable = False
    return out


def _rotate(A: np.ndarray, V: np.ndarray, p: int, q: int) -> None:
    """
    Complex Jacobi rotation zeroing A[p, q] (in place on A and V).

    The phase of A[p, q] is moved into column q first, then a real plane rotation
    annihilates the (now real) off-diagonal pair.
    """
    apq = A[p, q]
    mag = abs(apq)
    phase = apq / mag
    theta = 0.5 * np.arctan2(2.0 * mag, (A[q, q] - A[p, p]).real)
    c, s = np.cos(theta), np.sin(theta)

    W = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
    cols = [p, q]
    A[:, cols] = A[:, cols] @ W
    A[cols, :] = W.conj().T @ A[cols, :]
    A[p, q] = 0.0
    A[q, p] = 0.0
    A[p, p] = A[p, p].real
    A[q, q] = A[q, q].real
    V[:, cols] = V[:, cols] @ W


def eigh(M, tols: Tolerances = tolerances) -> EigenDecomposition:
    """
    Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Eigenvalues come back ascending; the eigenvector matrix is unitary and
    V diag(lambda) V^dagger reconstructs M within eig_tol (relative to max(1, ||M||_max)).
    Deterministic for identical input.
    """
    H = hermitian(M, tols)
    A = np.array(H, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)

    scale = max(1.0, max_norm(A))
    fro = float(np.linalg.norm(A))
    threshold = max(_OFF_DIAG_REL * fro, _TINY)

    converged = n == 1
    sweeps = 0
    while not converged:
        off = float(np.sqrt(np.sum(np.abs(np.triu(A, 1)) ** 2)))
        if off <= threshold:
            converged = True
            break
        if sweeps >= tols.jacobi_max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) > _TINY:
                    _rotate(A, V, p, q)
        sweeps += 1

    if not converged:
        raise NoConvergenceError(f"Jacobi did not converge in {tols.jacobi_max_sweeps} sweeps")

    evals = np.real(np.diag(A)).copy()
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    V = V[:, order]

    # post-check: reconstruction & orthonormality
    recon = max_norm(V @ np.diag(evals) @ V.conj().T - H) / scale
    ortho = max_norm(V.conj().T @ V - np.eye(n))
    if recon > tols.eig_tol or ortho > tols.eig_tol:
        raise NoConvergenceError(
            f"Jacobi residuals too large (reconstruction {recon:.2e}, orthonormality {ortho:.2e})"
        )

    logger.debug("eigh: dim=%d sweeps=%d", n, sweeps)
    evals.flags.writeable = False
    V.flags.writeable = False
    return EigenDecomposition(evals, V)


def is_psd(M, tol: Optional[float] = None, tols: Tolerances = tolerances) -> bool:
    """True iff the smallest eigenvalue is >= -tol (default psd_tol)."""
    tol = tols.psd_tol if tol is None else tol
    evals, _ = eigh(M, tols)
    return bool(evals[0] >= -tol)


def sqrt_psd(M, tols: Tolerances = tolerances) -> np.ndarray:
    """
    Principal square root of a PSD matrix.
    Eigenvalues in [-psd_tol, psd_tol) are snapped to 0, so projections map to themselves;
    anything below -psd_tol raises NotPSDError.
    """
    evals, V = eigh(M, tols)
    if evals[0] < -tols.psd_tol:
        raise NotPSDError(f"min eigenvalue {evals[0]:.3e} < -{tols.psd_tol:.1e}")
    roots = np.sqrt(np.where(evals < tols.psd_tol, 0.0, evals))
    out = (V * roots) @ V.conj().T
    out = 0.5 * (out + out.conj().T)
    out.flags.writeable = False
    return out


def is_projection(M, tol: Optional[float] = None, tols: Tolerances = tolerances) -> bool:
    """||M^2 - M||_max <= tol (default struct_tol)."""
    tol = tols.struct_tol if tol is None else tol
    arr = np.asarray(M, dtype=complex)
    return max_norm(arr @ arr - arr) <= tol


def spectral_clusters(M, tols: Tolerances = tolerances) -> List[Tuple[float, np.ndarray]]:
    """
    Group ascending eigenvalues into spectral atoms.

    An eigenvalue joins the current atom when it lies within cluster_tol of the atom's
    smallest member, so no two members of an atom differ by more than cluster_tol. The
    atom's value is the mean of its members and its projection is the sum of the member
    eigenprojections.
    """
    evals, V = eigh(M, tols)
    groups: List[List[int]] = []
    for i, lam in enumerate(evals):
        if groups and lam - evals[groups[-1][0]] <= tols.cluster_tol:
            groups[-1].append(i)
        else:
            groups.append([i])

    atoms: List[Tuple[float, np.ndarray]] = []
    for idx in groups:
        cols = V[:, idx]
        proj = cols @ cols.conj().T
        proj = 0.5 * (proj + proj.conj().T)
        proj.flags.writeable = False
        atoms.append((float(np.mean(evals[idx])), proj))
    return atoms
