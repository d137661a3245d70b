"""Regularization path, AIC selection and positive-definiteness correction."""

from dataclasses import dataclass

import numpy as np

from lcsm.errors import DegenerateDataError, InvalidInputError, NonConvergenceError
from lcsm.solver import (
    SufficientStats,
    build_stats,
    empirical_risk,
    fit,
    gram_matvec,
    objective,
    predict_sigma,
)
from lcsm.symcore import min_eigenvalue

__all__ = [
    "PathResult",
    "aic",
    "fit_lcsm",
    "fit_path",
    "lambda_max",
    "make_grid",
    "pd_correct",
    "select_optimal",
]


def lambda_max(stats, mask):
    """Smallest penalty at which every penalized coefficient is zero.

    Unpenalized coordinates are first fitted by least squares with the
    penalized ones held at zero; ``lambda_max`` is then the largest absolute
    partial residual correlation ``|c_j - n (G theta_free)_j|`` over the
    penalized coordinates. With every coordinate penalized this reduces to
    ``max_j |c_j|``.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0.0
    free = np.flatnonzero(~mask)
    k = stats.n_given
    theta = np.zeros(stats.p)
    if free.size:
        fg = free[free < k]
        fr = free[free >= k]
        if fg.size:
            G = stats.gram[np.ix_(fg, fg)]
            theta[fg] = np.linalg.solve(stats.n * G, stats.c[fg])
        theta[fr] = stats.c[fr] / (stats.n * stats.diag[fr])
    resid = np.abs(stats.c - stats.n * gram_matvec(stats, theta))
    return float(np.max(resid[mask]))


def make_grid(lam_max, delta=1e-4, m=100):
    """``m`` log-spaced values from ``delta * lam_max`` to ``lam_max``, ascending."""
    if not lam_max > 0:
        raise DegenerateDataError(f"lambda_max must be positive, got {lam_max}")
    if not 0 < delta < 1:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    if m < 2:
        raise InvalidInputError(f"need at least two grid points, got {m}")
    grid = np.geomspace(delta * lam_max, lam_max, int(m))
    grid[-1] = lam_max
    return grid


def aic(risk, active_size, d):
    """``risk + 2 * active_size / d``."""
    return risk + 2.0 * active_size / d


@dataclass
class PathResult:
    """Solutions along an ascending lambda grid.

    Attributes
    ----------
    lambdas : ndarray, shape (m,)
    coefs : ndarray, shape (m, p)
    risks, objectives, aics : ndarray, shape (m,)
    active_sizes : ndarray of int, shape (m,)
    n_iters : ndarray of int, shape (m,)
    kkt_worst : ndarray, shape (m,)
    selected : int
        Index of the AIC minimizer (ties go to the smaller lambda).
    sigma_hat : ndarray or None
        Covariance estimate at the selected lambda, after PD correction.
    omega : float
        Diagonal shift added by the PD correction (0 if none).
    """

    lambdas: np.ndarray
    coefs: np.ndarray
    risks: np.ndarray
    objectives: np.ndarray
    aics: np.ndarray
    active_sizes: np.ndarray
    n_iters: np.ndarray
    kkt_worst: np.ndarray
    selected: int
    sigma_hat: np.ndarray = None
    omega: float = 0.0

    @property
    def pd_corrected(self):
        return self.omega > 0

    @property
    def lambda_opt(self):
        return float(self.lambdas[self.selected])

    @property
    def coef(self):
        return self.coefs[self.selected]


def select_optimal(aics):
    """Index of the smallest AIC; the first (smallest lambda) on ties."""
    aics = np.asarray(aics, dtype=float)
    return int(np.flatnonzero(aics == aics.min())[0])


def fit_path(stats, bs, lambdas, *, mask=None, tol=1e-6, max_iter=10_000):
    """Warm-started fits from the largest lambda down to the smallest.

    ``lambdas`` must be ascending; results are stored in that order. Each
    stored solution is KKT-certified by :func:`lcsm.solver.fit`; the worst
    violation per lambda is kept in ``kkt_worst``.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise InvalidInputError("lambda grid must be a non-empty 1-D array")
    if np.any(np.diff(lambdas) <= 0):
        raise InvalidInputError("lambda grid must be strictly ascending")
    mask = bs.penalized if mask is None else np.asarray(mask, dtype=bool)
    m = lambdas.size
    coefs = np.zeros((m, stats.p))
    n_iters = np.zeros(m, dtype=int)
    kkt_worst = np.zeros(m)
    theta = np.zeros(stats.p)
    for idx in range(m - 1, -1, -1):
        lam = float(lambdas[idx])
        try:
            res = fit(stats, bs, lam, mask=mask, init=theta, tol=tol, max_iter=max_iter)
        except NonConvergenceError as exc:
            exc.lambda_index = idx
            raise
        theta = res.coef
        coefs[idx] = theta
        n_iters[idx] = res.n_iter
        kkt_worst[idx] = res.kkt.worst
    risks = np.array([empirical_risk(t, stats) for t in coefs])
    objectives = np.array([objective(t, stats, lam, mask) for t, lam in zip(coefs, lambdas)])
    active = np.count_nonzero(coefs, axis=1)
    aics = aic(risks, active, bs.dim)
    return PathResult(lambdas, coefs, risks, objectives, aics, active, n_iters, kkt_worst, select_optimal(aics))


def pd_correct(sigma, eps=1e-6):
    """Shift the diagonal so the smallest eigenvalue is at least ``eps``.

    Returns ``(sigma, 0.0)`` unchanged when ``sigma`` is already positive
    definite, otherwise ``(sigma + omega I, omega)`` with
    ``omega = |lambda_min| + eps``.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    sigma = np.asarray(sigma, dtype=float)
    lo = min_eigenvalue(sigma)
    if lo > 0:
        return sigma, 0.0
    omega = abs(lo) + eps
    eye = np.eye(sigma.shape[0])
    out = sigma + omega * eye
    # rounding in the shift can leave the floor a few ulps short; top it up
    for _ in range(4):
        short = eps - min_eigenvalue(out)
        if short <= 0:
            break
        omega = np.nextafter(omega + short, np.inf)
        out = sigma + omega * eye
    return out, float(omega)


def fit_lcsm(data, bs, *, delta=1e-4, m=100, lambdas=None, tol=1e-6, max_iter=10_000, pd_eps=1e-6, mask=None):
    """Full pipeline: lambda_max, grid, warm-started path, AIC, PD correction.

    Parameters
    ----------
    data : SufficientStats or array_like of shape (n, d, d)
    bs : BasisSet
    lambdas : array_like, optional
        Explicit ascending grid; overrides ``delta`` and ``m``. Without
        penalized coordinates the default grid is the single value 0.
    pd_eps : float or None
        Margin for :func:`pd_correct`; ``None`` skips the correction.
    """
    stats = data if isinstance(data, SufficientStats) else build_stats(data, bs)
    mask = bs.penalized if mask is None else np.asarray(mask, dtype=bool)
    if lambdas is None:
        # nothing penalized: the path collapses to plain least squares
        lambdas = make_grid(lambda_max(stats, mask), delta, m) if mask.any() else np.zeros(1)
    path = fit_path(stats, bs, lambdas, mask=mask, tol=tol, max_iter=max_iter)
    sigma = predict_sigma(path.coef, bs)
    if pd_eps is not None:
        sigma, path.omega = pd_correct(sigma, pd_eps)
    path.sigma_hat = sigma
    return path
