import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import complex_arrays
from fdswipt.exceptions import ContractError, SingularMatrixError
from fdswipt.linalg import (frobenius_norm, hermitian_eig, null_space_basis, solve_hermitian_pd,
                            spectral_norm)


def _hermitian(a):
    return 0.5 * (a + a.conj().T)


# -- hermitian_eig -------------------------------------------------------------

def test_eig_identity():
    eig = hermitian_eig(np.eye(2))
    assert np.allclose(eig.eigenvalues, [1.0, 1.0])
    assert np.allclose(eig.eigenvectors.conj().T @ eig.eigenvectors, np.eye(2), atol=1e-12)


def test_eig_diagonal_sorted_descending():
    eig = hermitian_eig(np.diag([3.0, -1.0]))
    assert np.allclose(eig.eigenvalues, [3.0, -1.0])
    assert abs(abs(eig.eigenvectors[0, 0]) - 1.0) < 1e-12
    assert abs(abs(eig.eigenvectors[1, 1]) - 1.0) < 1e-12


def test_eig_rank_one_outer_product():
    h = np.array([1.0, 1j]) / np.sqrt(2.0)
    eig = hermitian_eig(np.outer(h, h.conj()))
    assert np.allclose(eig.eigenvalues, [1.0, 0.0], atol=1e-12)
    # top eigenvector parallel to h
    assert abs(abs(np.vdot(h, eig.eigenvectors[:, 0])) - 1.0) < 1e-12


def test_eig_rejects_non_hermitian():
    with pytest.raises(ContractError):
        hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eig_rejects_non_square():
    with pytest.raises(ContractError):
        hermitian_eig(np.ones((2, 3)))


@given(complex_arrays((4, 4)))
def test_eig_reconstruction_and_trace(a):
    a = _hermitian(a)
    eig = hermitian_eig(a)
    v, lam = eig.eigenvectors, eig.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    recon = v @ np.diag(lam) @ v.conj().T
    assert np.linalg.norm(a - recon) <= 1e-10 * (1 + np.linalg.norm(a))
    assert np.max(np.abs(v.conj().T @ v - np.eye(4))) <= 1e-10
    assert abs(np.sum(lam) - np.trace(a).real) <= 1e-9 * max(1.0, np.sum(np.abs(lam)))


# -- null_space_basis ----------------------------------------------------------

def test_null_space_coordinate_axis():
    u = null_space_basis(np.array([[1.0], [0.0]]))
    assert u.shape == (2, 1)
    assert abs(u[0, 0]) <= 1e-10


def test_null_space_of_empty_matrix_is_identity():
    assert np.array_equal(null_space_basis(np.zeros((3, 0))), np.eye(3))


def test_null_space_rank_deficient_returns_larger_space():
    h = np.ones((4, 1)) @ np.ones((1, 2))  # two identical columns
    u = null_space_basis(h)
    assert u.shape == (4, 3)


@given(complex_arrays((4, 1)).filter(lambda h: np.linalg.norm(h) > 1e-3))
def test_null_space_random_4x1(h):
    u = null_space_basis(h)
    assert u.shape == (4, 3)
    assert np.max(np.abs(h.conj().T @ u)) <= 1e-10 * max(1.0, np.linalg.norm(h))
    assert np.max(np.abs(u.conj().T @ u - np.eye(3))) <= 1e-10
    proj = u @ u.conj().T
    assert np.max(np.abs(proj @ proj - proj)) <= 1e-9
    assert np.max(np.abs(proj - proj.conj().T)) <= 1e-9


# -- spectral_norm --------------------------------------------------------------

@pytest.mark.parametrize("a, expected", [
    (np.eye(3), 1.0),
    (np.diag([2.0, 0.5]), 2.0),
    (np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0),
])
def test_spectral_norm_examples(a, expected):
    assert abs(spectral_norm(a) - expected) <= 1e-10 * expected


@given(complex_arrays((3, 5)))
def test_spectral_norm_below_frobenius(a):
    assert spectral_norm(a) <= frobenius_norm(a) * (1 + 1e-12) + 1e-300
    assert abs(spectral_norm(a) - np.linalg.svd(a, compute_uv=False)[0]) \
        <= 1e-10 * max(1.0, spectral_norm(a))


# -- solve_hermitian_pd ------------------------------------------------------------

@pytest.mark.parametrize("a, b, expected", [
    (np.eye(2), [1.0, 2.0], [1.0, 2.0]),
    (2 * np.eye(2), [4.0, 0.0], [2.0, 0.0]),
    (np.array([[2.0, 1.0], [1.0, 2.0]]), [1.0, 1.0], [1 / 3, 1 / 3]),
])
def test_solve_examples(a, b, expected):
    assert np.allclose(solve_hermitian_pd(a, np.array(b)), expected, atol=1e-14)


@pytest.mark.parametrize("a", [np.diag([1.0, 0.0]), np.diag([1.0, -1.0]),
                               np.diag([1.0, 1e-14])])
def test_solve_rejects_singular(a):
    with pytest.raises(SingularMatrixError):
        solve_hermitian_pd(a, np.ones(2))


@given(complex_arrays((3, 3)), complex_arrays((3,)))
def test_solve_residual(m, b):
    a = m @ m.conj().T + np.eye(3)
    x = solve_hermitian_pd(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * max(np.linalg.norm(b), 1e-300) + 1e-300
