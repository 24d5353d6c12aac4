"""Dense real linear algebra: pivoted Householder QR, subspace bases, projectors.

Row space and null space here are always those of the weight matrix ``w``
acting on input vectors: the row space is the subspace of input space the map
can sense, the null space is ``{z : w @ z = 0}``.  Bases are returned as
2-D arrays whose ROWS are orthonormal vectors, so a basis of rank ``k`` in
ambient dimension ``n`` has shape ``(k, n)`` and the associated orthogonal
projector is ``basis.T @ basis``.

Basis sign and ordering are not unique; compare projectors, never raw bases.
"""

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError

DEFAULT_RANK_TOL = 1e-10


def as_matrix(w) -> np.ndarray:
    """Validate and return a finite 2-D float array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("matrix contains non-finite entries")
    return w


def as_vector(x) -> np.ndarray:
    """Validate and return a finite 1-D float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 1:
        raise InvalidInputError(f"expected a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("vector contains non-finite entries")
    return x


def householder_qr(a: np.ndarray, full: bool = False):
    """Column-pivoted Householder QR: ``a[:, perm] = q @ r``.

    Returns ``(q, r, perm)`` with ``q`` of shape (m, min(m, n)) (or (m, m)
    when ``full``), ``r`` upper triangular of shape (min(m, n), n), and
    ``perm`` the column permutation.  Pivoting picks the remaining column of
    largest residual norm at every step, which makes the magnitudes of the
    diagonal of ``r`` non-increasing and therefore usable for rank detection.
    """
    a = np.asarray(a, dtype=float)
    m, n = a.shape
    k = min(m, n)
    r = a.copy()
    perm = np.arange(n)
    reflectors: list[np.ndarray | None] = []
    for j in range(k):
        col_norms = np.sum(r[j:, j:] ** 2, axis=0)
        pivot = j + int(np.argmax(col_norms))
        if pivot != j:
            r[:, [j, pivot]] = r[:, [pivot, j]]
            perm[[j, pivot]] = perm[[pivot, j]]
        x = r[j:, j]
        norm_x = float(np.linalg.norm(x))
        if norm_x == 0.0:
            reflectors.append(None)
            continue
        v = x.copy()
        v[0] += norm_x if v[0] >= 0 else -norm_x
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        reflectors.append(v)
    q = np.eye(m, m if full else k)
    for j in reversed(range(k)):
        v = reflectors[j]
        if v is not None:
            q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    return q, np.triu(r[:k, :]), perm


def _qr_rank(r_diag: np.ndarray, rank_tol: float) -> int:
    mags = np.abs(r_diag)
    if mags.size == 0 or mags.max() == 0.0:
        return 0
    return int(np.sum(mags > rank_tol * mags.max()))


def qr_row_space_basis(w, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (rows) of the row space of ``w``.

    Rank is the number of QR diagonal magnitudes above ``rank_tol`` times the
    largest diagonal magnitude.
    """
    w = as_matrix(w)
    if rank_tol <= 0:
        raise InvalidInputError("rank_tol must be positive")
    q, r, _ = householder_qr(w.T)
    rank = _qr_rank(np.diag(r), rank_tol)
    return q[:, :rank].T.copy()


def null_space_basis(w, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (rows) of ``{z : w @ z = 0}``; shape (cols - rank, cols)."""
    w = as_matrix(w)
    if rank_tol <= 0:
        raise InvalidInputError("rank_tol must be positive")
    q, r, _ = householder_qr(w.T, full=True)
    rank = _qr_rank(np.diag(r), rank_tol)
    return q[:, rank:].T.copy()


def projector_from_basis(basis) -> np.ndarray:
    """Orthogonal projector onto the span of the basis rows.

    An empty basis (shape ``(0, n)``) projects onto {0} and yields the zero
    matrix.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2:
        raise InvalidInputError(f"expected a (rank, dim) basis, got shape {basis.shape}")
    if not np.all(np.isfinite(basis)):
        raise InvalidInputError("basis contains non-finite entries")
    rank = basis.shape[0]
    if rank > 0:
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(rank), atol=1e-8):
            raise InvalidInputError("basis rows are not orthonormal")
    return basis.T @ basis


def row_space_projector(w, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Projector onto the row space of ``w`` (QR route)."""
    return projector_from_basis(qr_row_space_basis(w, rank_tol))


def apply_projector(p, x) -> np.ndarray:
    """Apply a projector matrix to a vector, checking dimensions."""
    p = as_matrix(p)
    x = as_vector(x)
    if p.shape[0] != p.shape[1]:
        raise DimensionMismatchError(f"projector must be square, got {p.shape}")
    if p.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"projector dim {p.shape[1]} does not match vector dim {x.shape[0]}"
        )
    return p @ x
