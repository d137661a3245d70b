"""Symmetric-matrix primitives.

Symmetric matrices are plain ``(d, d)`` ndarrays. Half-vectors stack the
lower triangle column by column: ``(M11, M21, ..., Md1, M22, ..., Mdd)``.
The isometric variant scales off-diagonal slots by ``sqrt(2)`` so that the
Euclidean dot product of two half-vectors equals the Frobenius inner product
of the matrices.
"""

from functools import lru_cache

import numpy as np

from lcsm.errors import InvalidInputError

__all__ = [
    "as_symmetric",
    "half_length",
    "dim_from_half_length",
    "vh",
    "vh_inv",
    "vh_iso",
    "vh_iso_inv",
    "frob_inner",
    "frob_norm",
    "min_eigenvalue",
    "numerical_rank",
]

SQRT2 = np.sqrt(2.0)


def as_symmetric(M, atol=1e-10, name="matrix"):
    """Validate ``M`` as a square symmetric 2-D array and return it as float."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if not np.allclose(M, M.T, rtol=0.0, atol=atol * scale):
        raise InvalidInputError(f"{name} is not symmetric")
    return M


def half_length(d):
    return d * (d + 1) // 2


def dim_from_half_length(m):
    """Invert ``m = d(d+1)/2``; raise if ``m`` is not a triangular number."""
    d = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if d < 1 or half_length(d) != m:
        raise InvalidInputError(f"length {m} is not a triangular number d(d+1)/2")
    return d


@lru_cache(maxsize=64)
def _tril_index(d):
    # column-stacked lower triangle == row-stacked upper triangle, transposed
    cols, rows = np.triu_indices(d)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@lru_cache(maxsize=64)
def _iso_weights(d):
    rows, cols = _tril_index(d)
    w = np.where(rows == cols, 1.0, SQRT2)
    w.setflags(write=False)
    return w


def vh(M):
    """Plain half-vectorization of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    rows, cols = _tril_index(M.shape[0])
    return M[rows, cols]


def vh_inv(v):
    """Rebuild the symmetric matrix from a plain half-vector."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError("half-vector must be one-dimensional")
    d = dim_from_half_length(v.size)
    rows, cols = _tril_index(d)
    M = np.zeros((d, d))
    M[rows, cols] = v
    M[cols, rows] = v
    return M


def vh_iso(M):
    """Isometric half-vectorization (off-diagonals times sqrt(2)).

    Also accepts a stack of matrices with shape ``(k, d, d)`` and returns
    ``(k, d(d+1)/2)``.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[-1]
    rows, cols = _tril_index(d)
    return M[..., rows, cols] * _iso_weights(d)


def vh_iso_inv(v):
    """Inverse of :func:`vh_iso`; accepts ``(m,)`` or a stack ``(k, m)``."""
    v = np.asarray(v, dtype=float)
    d = dim_from_half_length(v.shape[-1])
    rows, cols = _tril_index(d)
    vals = v / _iso_weights(d)
    M = np.zeros(v.shape[:-1] + (d, d))
    M[..., rows, cols] = vals
    M[..., cols, rows] = vals
    return M


def frob_inner(A, B):
    """Frobenius inner product ``sum_kl A_kl B_kl``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise InvalidInputError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return float(np.vdot(A, B))


def frob_norm(A):
    return float(np.sqrt(frob_inner(A, A)))


def min_eigenvalue(A):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(np.asarray(A, dtype=float))[0])


def numerical_rank(A, tol=1e-10):
    """Number of singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    sv = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))
