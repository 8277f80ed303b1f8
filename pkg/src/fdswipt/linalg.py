"""Dense complex linear algebra used by the solvers.

Every routine takes and returns numpy arrays; complex values are plain
``complex128``. Instances in this package are tiny (at most ~16x16), so the
LAPACK-backed numpy/scipy kernels are used directly behind small contracts.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import ContractError, SingularMatrixError

HERMITIAN_TOL = 1e-12
RANK_RTOL = 1e-10


class HermitianEig(NamedTuple):
    """Eigenvalues in descending order and matching unitary eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ContractError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix has non-finite entries")
    return a


def hermitian_eig(a) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Raises
    ------
    ContractError
        If ``a`` is not square or not Hermitian to within 1e-12 (scaled by
        the largest entry magnitude when that exceeds one).
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ContractError(f"matrix must be square, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if np.max(np.abs(a - a.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ContractError("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return HermitianEig(w[::-1].copy(), v[:, ::-1].copy())


def null_space_basis(h) -> np.ndarray:
    """Orthonormal basis ``U`` of the null space of ``h^H``.

    ``h`` is ``n x m`` (one column per channel to be nulled); the result is
    ``n x (n - rank(h))`` with ``h^H U = 0``. A matrix with zero columns
    leaves the full space, so the identity is returned.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        h = h[:, None]
    n = h.shape[0]
    if h.shape[1] == 0:
        return np.eye(n, dtype=complex)
    h = as_matrix(h)
    # full SVD of h: left singular vectors beyond the rank span null(h^H)
    u, sv, _ = np.linalg.svd(h, full_matrices=True)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    return u[:, rank:].copy()


def spectral_norm(a) -> float:
    """Largest singular value of ``a`` (0 for an empty matrix)."""
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def solve_hermitian_pd(a, b) -> np.ndarray:
    """Solve ``a x = b`` for Hermitian positive definite ``a``.

    Raises
    ------
    SingularMatrixError
        If ``a`` is indefinite or its condition exceeds 1e12.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=complex)
    eig = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    if eig[-1] <= 0 or eig[0] <= 1e-12 * eig[-1]:
        raise SingularMatrixError(
            f"matrix is not positive definite (eigenvalue range "
            f"[{eig[0]:.3e}, {eig[-1]:.3e}])")
    factor = scipy.linalg.cho_factor(a, lower=True)
    return scipy.linalg.cho_solve(factor, b)


def frobenius_norm(a) -> float:
    """Frobenius norm, scaled first so tiny or huge entries do not under/overflow."""
    a = np.abs(np.asarray(a))
    scale = float(a.max()) if a.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    return scale * float(np.sqrt(np.sum((a / scale) ** 2)))
