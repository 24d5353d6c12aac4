import numpy as np
import pytest

from nusa import linalg
from nusa.errors import DimensionMismatchError, InvalidInputError
from nusa.linalg import (
    apply_projector,
    householder_qr,
    null_space_basis,
    projector_from_basis,
    qr_row_space_basis,
    row_space_projector,
)


def gram_schmidt_rows(w):
    """Manual orthonormalization oracle for small row-space checks."""
    basis = []
    for row in np.asarray(w, float):
        v = row.copy()
        for b in basis:
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            basis.append(v / norm)
    return np.array(basis)


def test_single_row_basis_is_normalized_row():
    basis = qr_row_space_basis(np.array([[3.0, 4.0]]))
    assert basis.shape == (1, 2)
    np.testing.assert_allclose(np.abs(basis[0]), [0.6, 0.8], atol=1e-12)


def test_orthonormal_rows_kept():
    w = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    basis = qr_row_space_basis(w)
    assert basis.shape == (2, 3)
    # compare projectors, not bases: span is unique, signs/order are not
    np.testing.assert_allclose(projector_from_basis(basis), np.diag([1.0, 1.0, 0.0]),
                               atol=1e-12)


def test_rank_deficient_rows_collapse():
    w = np.array([[1.0, 2.0], [2.0, 4.0]])
    basis = qr_row_space_basis(w)
    assert basis.shape == (1, 2)
    oracle = gram_schmidt_rows(w)
    np.testing.assert_allclose(projector_from_basis(basis),
                               projector_from_basis(oracle), atol=1e-12)


def test_zero_leading_row_does_not_confuse_rank():
    w = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 2.0]])
    basis = qr_row_space_basis(w)
    assert basis.shape == (1, 3)
    np.testing.assert_allclose(np.abs(basis[0]), np.array([1.0, 2.0, 2.0]) / 3.0,
                               atol=1e-12)


def test_non_finite_input_rejected():
    with pytest.raises(InvalidInputError):
        qr_row_space_basis(np.array([[np.nan, 1.0]]))
    with pytest.raises(InvalidInputError):
        null_space_basis(np.array([[np.inf, 1.0]]))
    with pytest.raises(InvalidInputError):
        qr_row_space_basis(np.array([[1.0, 2.0]]), rank_tol=0.0)


def test_projector_from_basis_examples():
    np.testing.assert_allclose(
        projector_from_basis(np.array([[1.0, 0, 0], [0, 1.0, 0]])),
        np.diag([1.0, 1.0, 0.0]))
    np.testing.assert_allclose(
        projector_from_basis(np.array([[0.6, 0.8]])),
        [[0.36, 0.48], [0.48, 0.64]], atol=1e-15)
    np.testing.assert_allclose(projector_from_basis(np.zeros((0, 4))), np.zeros((4, 4)))


def test_projector_fixes_basis_vectors():
    rng = np.random.default_rng(2)
    w = rng.normal(size=(3, 7))
    basis = qr_row_space_basis(w)
    p = projector_from_basis(basis)
    for b in basis:
        np.testing.assert_allclose(p @ b, b, atol=1e-12)


def test_projector_rejects_non_orthonormal_rows():
    with pytest.raises(InvalidInputError):
        projector_from_basis(np.array([[1.0, 1.0]]))


def test_null_space_examples():
    basis = null_space_basis(np.array([[1.0, 0, 0], [0, 1.0, 0]]))
    assert basis.shape == (1, 3)
    np.testing.assert_allclose(np.abs(basis[0]), [0, 0, 1], atol=1e-12)

    square = np.array([[2.0, 1.0], [0.5, 3.0]])  # full rank
    assert null_space_basis(square).shape == (0, 2)


def test_null_space_residuals_random_wide_matrix():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(32, 64))
    basis = null_space_basis(w)
    assert basis.shape == (32, 64)
    w_norm = np.linalg.norm(w)
    for z in basis:
        assert np.linalg.norm(w @ z) <= 1e-8 * w_norm


def test_apply_projector_examples():
    p = np.diag([1.0, 1.0, 0.0])
    np.testing.assert_allclose(apply_projector(p, [1.0, 2.0, 3.0]), [1.0, 2.0, 0.0])
    np.testing.assert_allclose(apply_projector(p, [0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    p2 = projector_from_basis(np.array([[0.6, 0.8]]))
    np.testing.assert_allclose(apply_projector(p2, [1.0, 0.0]), [0.36, 0.48], atol=1e-15)


def test_apply_projector_contraction():
    rng = np.random.default_rng(4)
    for _ in range(25):
        w = rng.normal(size=(3, 6))
        p = row_space_projector(w)
        x = rng.normal(size=6)
        assert np.linalg.norm(p @ x) <= np.linalg.norm(x) * (1 + 1e-12)


def test_apply_projector_dim_mismatch():
    with pytest.raises(DimensionMismatchError):
        apply_projector(np.eye(3), np.ones(4))
    with pytest.raises(DimensionMismatchError):
        apply_projector(np.ones((2, 3)), np.ones(3))


def test_householder_qr_reconstructs_and_is_orthonormal():
    rng = np.random.default_rng(5)
    for m, n in [(6, 4), (4, 6), (5, 5), (8, 3)]:
        a = rng.normal(size=(m, n))
        q, r, perm = householder_qr(a)
        np.testing.assert_allclose(q @ r, a[:, perm], atol=1e-12)
        np.testing.assert_allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-12)
        q_full, r_full, perm_full = householder_qr(a, full=True)
        np.testing.assert_allclose(q_full.T @ q_full, np.eye(m), atol=1e-12)
        np.testing.assert_allclose(q_full[:, : min(m, n)] @ r_full, a[:, perm_full],
                                   atol=1e-12)


def test_pivoted_diagonal_is_nonincreasing():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a = rng.normal(size=(7, 5))
        _, r, _ = householder_qr(a)
        mags = np.abs(np.diag(r))
        assert np.all(np.diff(mags) <= 1e-12)


def test_projector_suite_random_matrices():
    # 200 random sizes up to 16x32 (rows <= cols): symmetry, idempotency,
    # P w^T = w^T, and annihilation of the null-space basis, all within 1e-8
    rng = np.random.default_rng(7)
    for _ in range(200):
        rows = rng.integers(1, 17)
        cols = rng.integers(rows, 33)
        w = rng.normal(size=(rows, cols))
        p = row_space_projector(w)
        np.testing.assert_allclose(p, p.T, atol=1e-8)
        np.testing.assert_allclose(p @ p, p, atol=1e-8)
        np.testing.assert_allclose(p @ w.T, w.T, atol=1e-8)
        for z in null_space_basis(w):
            assert np.linalg.norm(p @ z) <= 1e-8


def test_rank_sum_row_space_plus_null_space():
    rng = np.random.default_rng(8)
    for _ in range(30):
        rows = rng.integers(1, 10)
        cols = rng.integers(1, 12)
        w = rng.normal(size=(rows, cols))
        if rng.random() < 0.3 and rows >= 2:
            w[rows - 1] = w[0] * 2.0  # force rank deficiency
        assert qr_row_space_basis(w).shape[0] + null_space_basis(w).shape[0] == cols


def test_projector_invariant_under_left_multiplication():
    rng = np.random.default_rng(9)
    for _ in range(25):
        w = rng.normal(size=(4, 9))
        a = np.eye(4) + 0.5 * rng.normal(size=(4, 4))  # comfortably invertible
        np.testing.assert_allclose(row_space_projector(a @ w), row_space_projector(w),
                                   atol=1e-6)


def test_projector_spectrum_small_instances():
    rng = np.random.default_rng(10)
    for _ in range(10):
        w = rng.normal(size=(2, 5))
        eigenvalues = np.linalg.eigvalsh(row_space_projector(w))
        assert np.all((np.abs(eigenvalues) < 1e-6) | (np.abs(eigenvalues - 1) < 1e-6))
