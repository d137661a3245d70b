"""Penalized least squares by cyclic coordinate descent.

The objective is

    l(theta) + 2 * lam * sum_{j in mask} |theta_j|,
    l(theta) = sum_i ||Z_i - sum_j theta_j B_j||_F^2,

and depends on the data only through :class:`SufficientStats`. By
construction the remainder block of the Gram matrix is the identity (times
the squared norms, after normalization) and its cross-Gram with the given
block vanishes, so a remainder update never involves another coordinate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from lcsm.errors import InvalidInputError, NonConvergenceError
from lcsm.symcore import vh_iso, vh_iso_inv

__all__ = [
    "FitResult",
    "KKTResult",
    "SufficientStats",
    "build_stats",
    "build_stats_from_observations",
    "coordinate_update",
    "empirical_risk",
    "fit",
    "gram_matvec",
    "kkt_check",
    "objective",
    "predict_sigma",
    "soft_threshold",
]


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Data summaries the objective depends on.

    Attributes
    ----------
    n : int
    c : ndarray, shape (p,)
        ``c_j = sum_i <B_j, Z_i>``.
    gram : ndarray, shape (s+1, s+1)
        Frobenius Gram matrix of the given block.
    diag : ndarray, shape (p,)
        ``||B_j||_F^2``.
    rss0 : float
        ``sum_i ||Z_i||_F^2``.
    """

    n: int
    c: np.ndarray
    gram: np.ndarray
    diag: np.ndarray
    rss0: float

    @property
    def p(self):
        return self.c.size

    @property
    def n_given(self):
        return self.gram.shape[0]


def _stats_from_sum(n, Z_sum, rss0, bs):
    v = vh_iso(Z_sum)
    c = np.concatenate([bs.given_vh @ v, bs.remainder @ v])
    return SufficientStats(int(n), c, bs.gram_given.copy(), bs.sq_norms.copy(), float(rss0))


def build_stats(data, bs):
    """Sufficient statistics from matrix observations ``Z_1..Z_n``.

    Parameters
    ----------
    data : array_like, shape (n, d, d)
    bs : BasisSet
    """
    Z = np.asarray(data, dtype=float)
    if Z.ndim == 2:
        Z = Z[None]
    if Z.ndim != 3 or Z.shape[0] == 0:
        raise InvalidInputError("data must be a non-empty stack of (d, d) matrices")
    if Z.shape[1:] != (bs.dim, bs.dim):
        raise InvalidInputError(f"data matrices are {Z.shape[1:]}, basis expects {(bs.dim, bs.dim)}")
    scale = max(1.0, float(np.max(np.abs(Z))))
    if not np.allclose(Z, np.swapaxes(Z, 1, 2), rtol=0.0, atol=1e-10 * scale):
        raise InvalidInputError("data matrices must be symmetric")
    return _stats_from_sum(Z.shape[0], Z.sum(axis=0), float(np.sum(Z * Z)), bs)


def build_stats_from_observations(Y, bs):
    """Sufficient statistics for ``Z_i = Y_i Y_i^T`` without forming each ``Z_i``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise InvalidInputError("observations must be a non-empty (n, d) array")
    if Y.shape[1] != bs.dim:
        raise InvalidInputError(f"observations have {Y.shape[1]} columns, basis expects {bs.dim}")
    sq = np.einsum("ij,ij->i", Y, Y)
    return _stats_from_sum(Y.shape[0], Y.T @ Y, float(np.sum(sq * sq)), bs)


def gram_matvec(stats, theta):
    """Full Gram matrix times ``theta`` using the block structure."""
    k = stats.n_given
    out = stats.diag * theta
    out[:k] = stats.gram @ theta[:k]
    return out


def empirical_risk(theta, stats):
    theta = np.asarray(theta, dtype=float)
    quad = float(theta @ gram_matvec(stats, theta))
    return stats.rss0 - 2.0 * float(theta @ stats.c) + stats.n * quad


def objective(theta, stats, lam, mask):
    theta = np.asarray(theta, dtype=float)
    return empirical_risk(theta, stats) + 2.0 * lam * float(np.sum(np.abs(theta[mask])))


def soft_threshold(a, t):
    """``sign(a) * max(|a| - t, 0)``; vectorized."""
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def coordinate_update(j, theta, stats, lam, mask):
    """Exact minimizer of the objective along coordinate ``j``."""
    k = stats.n_given
    n, dj = stats.n, stats.diag[j]
    if j < k:
        cross = float(stats.gram[j] @ theta[:k]) - stats.gram[j, j] * theta[j]
    else:
        cross = 0.0
    a = (stats.c[j] - n * cross) / (n * dj)
    t = lam / (n * dj) if mask[j] else 0.0
    return float(soft_threshold(a, t))


@dataclass(frozen=True)
class KKTResult:
    ok: bool
    worst: float
    index: int

    def __bool__(self):
        return bool(self.ok)


def kkt_check(theta, stats, lam, mask, tol):
    """Subgradient optimality check.

    With ``g = -(c - n G theta)`` (half the gradient of the risk), an optimum
    satisfies ``g_j = 0`` for free coordinates, ``g_j + lam sign(theta_j) = 0``
    for active penalized ones and ``|g_j| <= lam`` for zero penalized ones.
    """
    theta = np.asarray(theta, dtype=float)
    g = stats.n * gram_matvec(stats, theta) - stats.c
    viol = np.abs(g)
    pen = np.asarray(mask, dtype=bool)
    active = pen & (theta != 0)
    viol[active] = np.abs(g[active] + lam * np.sign(theta[active]))
    zero = pen & (theta == 0)
    viol[zero] = np.maximum(np.abs(g[zero]) - lam, 0.0)
    j = int(np.argmax(viol)) if viol.size else 0
    worst = float(viol[j]) if viol.size else 0.0
    return KKTResult(worst <= tol, worst, j)


@dataclass
class FitResult:
    coef: np.ndarray
    n_iter: int
    objective: float
    converged: bool
    kkt: KKTResult = None
    trace: list = field(default=None, repr=False)


def _cycle(theta, stats, lam, mask, trace):
    """One full pass j = 1..p, in place."""
    k = stats.n_given
    n = stats.n
    for j in range(k):
        new = coordinate_update(j, theta, stats, lam, mask)
        if trace is not None:
            old = theta[j]
            theta[j] = new
            trace.append(trace[-1] + _delta_given(j, old, new, theta, stats, lam, mask))
        else:
            theta[j] = new
    if theta.size > k:
        d = stats.diag[k:]
        t = np.where(mask[k:], lam / (n * d), 0.0)
        old = theta[k:].copy()
        new = soft_threshold(stats.c[k:] / (n * d), t)
        theta[k:] = new
        if trace is not None:
            w = np.where(mask[k:], 2.0 * lam, 0.0)
            step = n * d * (new**2 - old**2) - 2.0 * stats.c[k:] * (new - old) + w * (np.abs(new) - np.abs(old))
            trace.extend((trace[-1] + np.cumsum(step)).tolist())


def _delta_given(j, old, new, theta, stats, lam, mask):
    # objective change when theta_j moves old -> new, others fixed (theta already holds new)
    k = stats.n_given
    cross = float(stats.gram[j] @ theta[:k]) - stats.gram[j, j] * new
    dq = stats.n * (stats.gram[j, j] * (new**2 - old**2) + 2.0 * cross * (new - old))
    pen = 2.0 * lam * (abs(new) - abs(old)) if mask[j] else 0.0
    return dq - 2.0 * stats.c[j] * (new - old) + pen


def fit(data, bs, lam, *, mask=None, init=None, tol=1e-6, max_iter=10_000, kkt_tol=None, trace=False):
    """Minimize the penalized objective at a single ``lam``.

    Parameters
    ----------
    data : SufficientStats or array_like of shape (n, d, d)
    bs : BasisSet
    lam : float
        Penalty level, ``>= 0``.
    mask : bool array, optional
        Penalized coordinates; defaults to ``bs.penalized``.
    init : array_like, optional
        Starting point (warm start). Zero by default.
    tol : float
        Stop when the l2 distance between successive full-cycle iterates
        drops below ``tol``...
    kkt_tol : float, optional
        ...and the KKT check passes at ``kkt_tol`` (default
        ``1e-4 * (1 + lam)``, floored at ``1e-12 * max|c|``).
    trace : bool
        Record the objective after every single-coordinate update.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` full cycles; carries the last iterate.
    """
    stats = data if isinstance(data, SufficientStats) else build_stats(data, bs)
    if lam < 0 or not math.isfinite(lam):
        raise InvalidInputError(f"lambda must be finite and >= 0, got {lam}")
    mask = bs.penalized if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (stats.p,):
        raise InvalidInputError("mask length does not match the number of coefficients")
    theta = np.zeros(stats.p) if init is None else np.array(init, dtype=float)
    if theta.shape != (stats.p,):
        raise InvalidInputError("init has the wrong length")
    if kkt_tol is None:
        kkt_tol = max(1e-4 * (1.0 + lam), 1e-12 * float(np.max(np.abs(stats.c), initial=0.0)))

    log = [objective(theta, stats, lam, mask)] if trace else None
    for it in range(1, max_iter + 1):
        prev = theta.copy()
        _cycle(theta, stats, lam, mask, log)
        if np.linalg.norm(theta - prev) < tol:
            kkt = kkt_check(theta, stats, lam, mask, kkt_tol)
            if kkt:
                return FitResult(theta, it, objective(theta, stats, lam, mask), True, kkt, log)
    raise NonConvergenceError(
        f"coordinate descent did not converge in {max_iter} cycles at lambda={lam:g}",
        coef=theta, n_iter=max_iter,
    )


def predict_sigma(theta, bs):
    """Dense ``sum_j theta_j B_j``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (bs.p,):
        raise InvalidInputError(f"expected {bs.p} coefficients, got {theta.shape}")
    k = len(bs.given)
    out = np.tensordot(theta[:k], np.stack(bs.given), axes=1)
    if bs.q:
        out = out + vh_iso_inv(theta[k:] @ bs.remainder)
    return out
