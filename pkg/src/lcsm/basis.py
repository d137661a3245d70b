"""Basis construction: identity, given matrices and an orthonormal remainder.

The full basis is ``{I, G_1..G_s, F_1..F_q}``. The remainder matrices ``F_k``
are Frobenius-orthonormal and Frobenius-orthogonal to every given matrix.
They are computed in isometric half-vector coordinates (see
:func:`lcsm.symcore.vh_iso`) and stored that way, one row per matrix.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from lcsm.errors import DependencyError, InvalidInputError
from lcsm.symcore import (
    as_symmetric,
    frob_norm,
    half_length,
    numerical_rank,
    vh_iso,
    vh_iso_inv,
)

__all__ = [
    "BasisSet",
    "IndependenceReport",
    "PENALTY_MODES",
    "adjacency_powers",
    "build_basis",
    "check_linear_independence",
    "compute_u_p",
    "normalize_basis",
    "penalty_mask",
    "remainder_basis",
]

DEPENDENCY_TOL = 1e-10
PENALTY_MODES = ("default", "remainder-only", "all")


@dataclass(frozen=True)
class IndependenceReport:
    ok: bool
    min_eig: float
    max_eig: float
    index: int | None = None  # first matrix in the span of its predecessors

    def __bool__(self):
        return bool(self.ok)


def check_linear_independence(mats, tol=DEPENDENCY_TOL):
    """Test linear independence of symmetric matrices.

    Uses the Gram matrix of the isometric half-vectors, whose smallest
    eigenvalue is compared to ``tol`` times the largest. When dependent, the
    report names the first matrix that makes a prefix dependent.
    """
    mats = [np.asarray(M, dtype=float) for M in mats]
    if not mats:
        return IndependenceReport(True, np.inf, np.inf)
    V = vh_iso(np.stack(mats))
    gram = V @ V.T
    eig = np.linalg.eigvalsh(gram)
    lo, hi = float(eig[0]), float(eig[-1])
    if hi > 0 and lo > tol * hi:
        return IndependenceReport(True, lo, hi)
    index = None
    for k in range(len(mats)):
        sub = np.linalg.eigvalsh(gram[: k + 1, : k + 1])
        if sub[-1] <= 0 or sub[0] <= tol * sub[-1]:
            index = k
            break
    return IndependenceReport(False, lo, hi, index)


def adjacency_powers(A, s):
    """Return ``[A, A^2, ..., A^s]``."""
    if int(s) != s or s < 1:
        raise InvalidInputError(f"order s must be a positive integer, got {s}")
    A = as_symmetric(A, name="adjacency")
    out = [A.copy()]
    for _ in range(int(s) - 1):
        out.append(out[-1] @ A)
    return out


def remainder_basis(given, q="full", tol=DEPENDENCY_TOL):
    """Orthonormal basis of the Frobenius orthogonal complement of ``given``.

    Parameters
    ----------
    given : sequence of (d, d) arrays
        Linearly independent symmetric matrices (usually ``I, G_1..G_s``).
    q : int or "full"
        Number of remainder matrices to keep. ``"full"`` keeps all
        ``d(d+1)/2 - len(given)`` of them.

    Returns
    -------
    ndarray of shape (q, d(d+1)/2)
        Isometric half-vectors of ``F_1..F_q``. Use
        :func:`lcsm.symcore.vh_iso_inv` for dense matrices.

    Notes
    -----
    The complement comes from a complete Householder QR of the
    ``(d(d+1)/2, len(given))`` matrix of isometric half-vectors, so the
    output is deterministic for fixed inputs.
    """
    given = [as_symmetric(G, name="basis matrix") for G in given]
    if not given:
        raise InvalidInputError("need at least one given matrix")
    d = given[0].shape[0]
    if any(G.shape != (d, d) for G in given):
        raise InvalidInputError("given matrices differ in dimension")
    report = check_linear_independence(given, tol)
    if not report:
        raise DependencyError(
            f"given basis is linearly dependent at index {report.index}", report.index
        )
    m = half_length(d)
    q_full = m - len(given)
    if q == "full":
        q = q_full
    if int(q) != q or not 0 <= q <= q_full:
        raise InvalidInputError(f"q must be in [0, {q_full}] or 'full', got {q}")
    D = vh_iso(np.stack(given)).T
    Q, _ = np.linalg.qr(D, mode="complete")
    return np.ascontiguousarray(Q[:, len(given) : len(given) + int(q)].T)


def penalty_mask(s, q, mode="default"):
    """Boolean mask over ``p = 1 + s + q`` coefficients marking penalized ones.

    ``default`` leaves only the intercept free, ``remainder-only`` penalizes
    the remainder coefficients, ``all`` penalizes every coordinate.
    """
    if mode not in PENALTY_MODES:
        raise InvalidInputError(f"unknown penalty mode {mode!r}; choose from {PENALTY_MODES}")
    mask = np.ones(1 + s + q, dtype=bool)
    if mode == "default":
        mask[0] = False
    elif mode == "remainder-only":
        mask[: 1 + s] = False
    return mask


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Ordered basis ``B_1..B_p = I, G_1..G_s, F_1..F_q``.

    Attributes
    ----------
    given : tuple of ndarray
        Dense ``(d, d)`` matrices; ``given[0]`` is the (possibly scaled) identity.
    remainder : ndarray, shape (q, d(d+1)/2)
        Isometric half-vectors of the orthonormal remainder matrices.
    penalized : ndarray of bool, shape (p,)
    scales : ndarray, shape (p,)
        Frobenius norms of the matrices before normalization (ones if the
        basis was never normalized). Coefficients on the original scale are
        ``coef / scales``.
    """

    dim: int
    given: tuple
    remainder: np.ndarray
    penalized: np.ndarray
    scales: np.ndarray = field(default=None)
    normalized: bool = False

    def __post_init__(self):
        if self.scales is None:
            object.__setattr__(self, "scales", np.ones(self.p))
        if self.penalized.shape != (self.p,):
            raise InvalidInputError("penalty mask length does not match p")

    @property
    def s(self):
        return len(self.given) - 1

    @property
    def q(self):
        return self.remainder.shape[0]

    @property
    def p(self):
        return len(self.given) + self.remainder.shape[0]

    @cached_property
    def given_vh(self):
        """Isometric half-vectors of the given block, shape ``(s+1, m)``."""
        return vh_iso(np.stack(self.given))

    @cached_property
    def gram_given(self):
        V = self.given_vh
        return V @ V.T

    @cached_property
    def sq_norms(self):
        """``||B_j||_F^2`` for every j."""
        return np.concatenate([np.diag(self.gram_given), np.einsum("ij,ij->i", self.remainder, self.remainder)])

    @cached_property
    def u_p(self):
        return compute_u_p(self)

    def remainder_matrices(self):
        return vh_iso_inv(self.remainder)

    def matrices(self):
        """All ``p`` basis matrices as a dense ``(p, d, d)`` array."""
        return np.concatenate([np.stack(self.given), self.remainder_matrices()])

    def with_mask(self, mode):
        return BasisSet(
            self.dim, self.given, self.remainder, penalty_mask(self.s, self.q, mode),
            self.scales, self.normalized,
        )

    def orthogonality_residuals(self):
        """Worst deviations from the remainder invariants.

        Returns
        -------
        dict with ``orthonormality`` (max ``|<F_k, F_l> - delta_kl|``) and
        ``cross`` (max ``|<F_k, G_j>|`` including the identity).
        """
        R = self.remainder
        if R.shape[0] == 0:
            return {"orthonormality": 0.0, "cross": 0.0}
        ortho = float(np.max(np.abs(R @ R.T - np.eye(R.shape[0]))))
        cross = float(np.max(np.abs(R @ self.given_vh.T)))
        return {"orthonormality": ortho, "cross": cross}


def normalize_basis(bs):
    """Scale every basis matrix to unit Frobenius norm.

    The remainder is already orthonormal; its scale factors are recorded
    anyway. Scale factors multiply into ``bs.scales`` so repeated
    normalization stays consistent.
    """
    norms = np.sqrt(bs.sq_norms)
    if np.any(norms == 0):
        j = int(np.flatnonzero(norms == 0)[0])
        raise InvalidInputError(f"basis matrix {j} is zero and cannot be normalized")
    given = tuple(G / n for G, n in zip(bs.given, norms[: len(bs.given)]))
    remainder = bs.remainder / norms[len(bs.given) :, None]
    return BasisSet(bs.dim, given, remainder, bs.penalized.copy(), bs.scales * norms, True)


def compute_u_p(bs, tol=1e-10):
    """``max_j sqrt(rank(B_j))`` over the whole basis."""
    ranks = [numerical_rank(G, tol) for G in bs.given]
    ranks.extend(numerical_rank(F, tol) for F in bs.remainder_matrices())
    return float(np.sqrt(max(ranks)))


def build_basis(d=None, given=(), adjacency=None, s=0, q="full", penalize="default", normalize=False):
    """Assemble a :class:`BasisSet`.

    Parameters
    ----------
    d : int, optional
        Dimension; inferred from ``adjacency`` or ``given`` when omitted.
    given : sequence of (d, d) arrays
        Extra given matrices ``G_j`` placed after the identity.
    adjacency : (d, d) array, optional
        When given, ``A, A^2, ..., A^s`` are appended to ``given``.
    s : int
        Adjacency order; ignored without ``adjacency``.
    q : int or "full"
    penalize : {"default", "remainder-only", "all"}
    normalize : bool
        Scale every matrix to unit Frobenius norm.
    """
    mats = [as_symmetric(G, name=f"given matrix {k}") for k, G in enumerate(given)]
    if adjacency is not None:
        mats.extend(adjacency_powers(adjacency, s))
    if d is None:
        if not mats:
            raise InvalidInputError("dimension d is required when no matrices are given")
        d = mats[0].shape[0]
    if any(G.shape != (d, d) for G in mats):
        raise InvalidInputError(f"all given matrices must be {d}x{d}")
    full = [np.eye(d)] + mats
    remainder = remainder_basis(full, q)
    bs = BasisSet(d, tuple(full), remainder, penalty_mask(len(mats), remainder.shape[0], penalize))
    return normalize_basis(bs) if normalize else bs
