"""Monte-Carlo study: network adjacency generators, data synthesis, metrics.

Each replication draws an adjacency matrix, builds the basis
``{I, A, ..., A^s, F_1..F_q}``, forms the true covariance
``Sigma_A + Sigma_R`` and ``n`` noisy matrix observations
``Z_i = Sigma_A + Sigma_R + eps_i`` with centered Wishart errors, then fits
the penalized estimator (AIC-selected) and the unpenalized adjacency-only
least-squares baseline.
"""

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from lcsm.basis import build_basis
from lcsm.errors import DependencyError, InvalidInputError, LCSMError
from lcsm.path import fit_lcsm
from lcsm.solver import build_stats, predict_sigma
from lcsm.symcore import frob_norm, min_eigenvalue

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_HUBS",
    "RepResult",
    "SimConfig",
    "SimResult",
    "TrueCovariance",
    "fe",
    "gen_adjacency",
    "gen_dataset",
    "gen_errors",
    "gen_true_cov",
    "lcm_fit",
    "mse",
    "run_replications",
    "write_csv",
]

CSV_COLUMNS = ("type", "d", "s", "rep", "fe_lcsm", "fe_lcm", "mse_lcsm", "mse_lcm", "runtime_s", "pd_corrected")

DEFAULT_HUBS = {
    1: {20: 2, 50: 3, 80: 4},
    2: {20: (1, 1), 50: (1, 1), 80: (2, 2)},
}

P_HUB = 0.7
P_NONHUB = 0.02
P_RANDOM = 0.2


def _hub_graph(d, hubs, rng, p_hub, p_base):
    # strict lower triangle; entries in the first `hubs` columns use p_hub
    P = np.full((d, d), p_base)
    P[:, :hubs] = p_hub
    L = np.tril(rng.random((d, d)) < P, k=-1).astype(float)
    return L + L.T


def gen_adjacency(adj_type, d, rng, hubs=None, p_hub=P_HUB, p_base=P_NONHUB, p_random=P_RANDOM):
    """Draw a 0/1 symmetric adjacency matrix with zero diagonal.

    Parameters
    ----------
    adj_type : {1, 2, 3}
        1: hub network. Each strict-lower-triangle entry is an independent
        Bernoulli draw with probability ``p_hub`` in a hub column and
        ``p_base`` elsewhere; hubs are the first ``hubs`` nodes.
        2: block-diagonal pair of independent type-1 graphs of size ``d/2``
        with ``hubs = (h1, h2)``.
        3: Erdos-Renyi with edge probability ``p_random``.
    hubs : int or pair of int, optional
        Defaults to :data:`DEFAULT_HUBS` for the tabulated dimensions.
    """
    if adj_type not in (1, 2, 3):
        raise InvalidInputError(f"adjacency type must be 1, 2 or 3, got {adj_type}")
    if int(d) != d or d < 2:
        raise InvalidInputError(f"d must be an integer >= 2, got {d}")
    d = int(d)
    if adj_type == 3:
        L = np.tril(rng.random((d, d)) < p_random, k=-1).astype(float)
        return L + L.T
    if hubs is None:
        try:
            hubs = DEFAULT_HUBS[adj_type][d]
        except KeyError:
            raise InvalidInputError(f"no default hub count for type {adj_type}, d={d}; pass hubs") from None
    if adj_type == 1:
        if not 0 <= int(hubs) <= d:
            raise InvalidInputError(f"hub count {hubs} out of range for d={d}")
        return _hub_graph(d, int(hubs), rng, p_hub, p_base)
    if d % 2:
        raise InvalidInputError(f"type 2 needs an even dimension, got d={d}")
    h1, h2 = hubs
    half = d // 2
    A = np.zeros((d, d))
    A[:half, :half] = _hub_graph(half, int(h1), rng, p_hub, p_base)
    A[half:, half:] = _hub_graph(half, int(h2), rng, p_hub, p_base)
    return A


@dataclass(eq=False)
class TrueCovariance:
    sigma_A: np.ndarray
    sigma_R: np.ndarray
    theta: np.ndarray
    basis: object
    is_pd: bool

    @property
    def sigma(self):
        return self.sigma_A + self.sigma_R


def gen_true_cov(A, s, alpha0=300.0, alpha=None, beta_head=(50.0, -50.0, -50.0, 50.0), q="full"):
    """True covariance on the unnormalized basis ``{I, A..A^s, F_1..F_q}``.

    ``theta = (alpha0, alpha_1..alpha_s, beta_head, 0, ..., 0)``. Raises
    :class:`~lcsm.errors.DependencyError` when ``{I, A, ..., A^s}`` is
    linearly dependent.
    """
    alpha = np.full(s, 10.0) if alpha is None else np.asarray(alpha, dtype=float)
    if alpha.shape != (s,):
        raise InvalidInputError(f"alpha must have length s={s}")
    bs = build_basis(adjacency=A, s=s, q=q)
    beta_head = np.asarray(beta_head, dtype=float)
    if beta_head.size > bs.q:
        raise InvalidInputError(f"beta_head has {beta_head.size} entries but q={bs.q}")
    theta = np.zeros(bs.p)
    theta[0] = alpha0
    theta[1 : s + 1] = alpha
    theta[s + 1 : s + 1 + beta_head.size] = beta_head
    k = s + 1
    t_A = theta.copy()
    t_A[k:] = 0.0
    sigma_A = predict_sigma(t_A, bs)
    sigma_R = predict_sigma(theta - t_A, bs)
    return TrueCovariance(sigma_A, sigma_R, theta, bs, min_eigenvalue(sigma_A + sigma_R) > 0)


def gen_errors(n, d, sigma_e2, rng):
    """``n`` centered Wishart error matrices ``X^T X / d - sigma_e2 I``.

    ``X`` is ``d x d`` with iid ``N(0, sigma_e2)`` entries, so ``X^T X`` is
    Wishart with scale ``sigma_e2 I`` and ``d`` degrees of freedom.
    """
    if not sigma_e2 > 0:
        raise InvalidInputError("sigma_e2 must be positive")
    X = rng.normal(0.0, np.sqrt(sigma_e2), size=(n, d, d))
    W = np.einsum("nki,nkj->nij", X, X)
    return W / d - sigma_e2 * np.eye(d)


def fe(sigma_hat, sigma_A, sigma_R):
    """Scaled Frobenius error ``||Sigma_hat - Sigma_A - Sigma_R||_F / sqrt(d)``."""
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    return frob_norm(sigma_hat - sigma_A - sigma_R) / np.sqrt(sigma_hat.shape[0])


def mse(theta_hat, theta_true):
    """Mean squared coefficient error over the true support."""
    theta_true = np.asarray(theta_true, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape != theta_true.shape:
        raise InvalidInputError("coefficient vectors differ in length")
    support = theta_true != 0
    if not support.any():
        raise InvalidInputError("true coefficient vector has no nonzero entries")
    return float(np.mean((theta_true[support] - theta_hat[support]) ** 2))


def _lcm_from_stats(stats, k):
    G = stats.gram[:k, :k]
    try:
        return np.linalg.solve(G, stats.c[:k] / stats.n)
    except np.linalg.LinAlgError as exc:
        raise DependencyError("singular Gram matrix for the adjacency-only basis") from exc


def lcm_fit(data, A, s):
    """Unpenalized least squares on ``{I, A, ..., A^s}`` only.

    Returns
    -------
    theta : ndarray, shape (s+1,)
    sigma_hat : ndarray, shape (d, d)
    """
    bs = build_basis(adjacency=A, s=s, q=0)
    stats = build_stats(data, bs)
    theta = _lcm_from_stats(stats, s + 1)
    return theta, predict_sigma(theta, bs)


@dataclass
class SimConfig:
    adj_type: int
    d: int
    n: int = 50
    s: int = 2
    hubs: object = None
    reps: int = 100
    seed: int = 0
    alpha0: float = 300.0
    alpha: tuple = None
    beta_head: tuple = (50.0, -50.0, -50.0, 50.0)
    sigma_e2: float = 1.0
    delta: float = 1e-4
    m: int = 100
    tol: float = 1e-6
    penalize: str = "default"
    pd_eps: float = 1e-6
    fixed_adjacency: bool = False

    def __post_init__(self):
        if self.adj_type not in (1, 2, 3):
            raise InvalidInputError(f"adjacency type must be 1, 2 or 3, got {self.adj_type}")
        if self.adj_type == 2 and self.d % 2:
            raise InvalidInputError("type 2 needs an even dimension")
        if self.reps < 1 or self.n < 1 or self.s < 1:
            raise InvalidInputError("reps, n and s must be positive")


@dataclass
class RepResult:
    rep: int
    fe_lcsm: float
    fe_lcm: float
    mse_lcsm: float
    mse_lcm: float
    runtime_s: float
    pd_corrected: bool
    truth_pd: bool
    lambda_opt: float = float("nan")


@dataclass
class SimResult:
    config: SimConfig
    reps: list
    failures: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.reps], dtype=float)

    def mean(self, name):
        x = self.column(name)
        return float(np.mean(x)) if x.size else float("nan")

    def se(self, name):
        """Sample standard deviation over ``sqrt(reps)``."""
        x = self.column(name)
        if x.size < 2:
            return float("nan")
        return float(np.std(x, ddof=1) / np.sqrt(x.size))

    @property
    def n_nonpd_truth(self):
        return sum(not r.truth_pd for r in self.reps)

    def summary(self):
        out = {}
        for name in ("fe_lcsm", "fe_lcm", "mse_lcsm", "mse_lcm", "runtime_s"):
            out[name] = (self.mean(name), self.se(name))
        out["n_ok"] = len(self.reps)
        out["n_failed"] = len(self.failures)
        out["n_pd_corrected"] = sum(r.pd_corrected for r in self.reps)
        out["n_nonpd_truth"] = self.n_nonpd_truth
        return out


def gen_dataset(cfg, rng, A=None):
    """One simulated dataset.

    Returns
    -------
    Z : ndarray, shape (n, d, d)
    truth : TrueCovariance
    A : ndarray
        The adjacency matrix used.
    """
    if A is None:
        A = gen_adjacency(cfg.adj_type, cfg.d, rng, cfg.hubs)
    truth = gen_true_cov(A, cfg.s, cfg.alpha0, cfg.alpha, cfg.beta_head)
    Z = truth.sigma + gen_errors(cfg.n, cfg.d, cfg.sigma_e2, rng)
    return Z, truth, A


def _one_rep(cfg, rep, seed_seq, A_fixed):
    rng = np.random.default_rng(seed_seq)
    Z, truth, A = gen_dataset(cfg, rng, A_fixed)
    bs = truth.basis.with_mask(cfg.penalize)
    k = cfg.s + 1

    t0 = time.perf_counter()
    stats = build_stats(Z, bs)
    path = fit_lcsm(stats, bs, delta=cfg.delta, m=cfg.m, tol=cfg.tol, pd_eps=cfg.pd_eps)
    runtime = time.perf_counter() - t0

    theta_lcm = np.concatenate([_lcm_from_stats(stats, k), np.zeros(bs.q)])
    sigma_lcm = predict_sigma(theta_lcm, bs)
    return RepResult(
        rep=rep,
        fe_lcsm=fe(path.sigma_hat, truth.sigma_A, truth.sigma_R),
        fe_lcm=fe(sigma_lcm, truth.sigma_A, truth.sigma_R),
        mse_lcsm=mse(path.coef, truth.theta),
        mse_lcm=mse(theta_lcm, truth.theta),
        runtime_s=runtime,
        pd_corrected=path.pd_corrected,
        truth_pd=truth.is_pd,
        lambda_opt=path.lambda_opt,
    )


def run_replications(cfg, threads=1):
    """Run ``cfg.reps`` independent replications.

    Replication ``r`` draws from its own stream, the ``r``-th child of
    ``SeedSequence(cfg.seed)``, so results do not depend on ``threads``.
    Replications that raise a package error are skipped and listed in
    ``failures`` as ``(rep, message)``.
    """
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.reps + 1)
    A_fixed = None
    if cfg.fixed_adjacency:
        A_fixed = gen_adjacency(cfg.adj_type, cfg.d, np.random.default_rng(children[-1]), cfg.hubs)

    def task(rep):
        try:
            return _one_rep(cfg, rep, children[rep], A_fixed)
        except LCSMError as exc:
            return (rep, f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(task, range(cfg.reps)))
    else:
        outcomes = [task(r) for r in range(cfg.reps)]
    reps = [o for o in outcomes if isinstance(o, RepResult)]
    failures = [o for o in outcomes if not isinstance(o, RepResult)]
    return SimResult(cfg, reps, failures)


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(result, fh=None, timing=True):
    """Write one row per successful replication; returns the text when ``fh`` is None.

    With ``timing=False`` the ``runtime_s`` field is left empty so the output
    is a pure function of the configuration and seed.
    """
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    cfg = result.config
    for r in result.reps:
        w.writerow([
            cfg.adj_type, cfg.d, cfg.s, r.rep,
            _fmt(r.fe_lcsm), _fmt(r.fe_lcm), _fmt(r.mse_lcsm), _fmt(r.mse_lcm),
            _fmt(r.runtime_s) if timing else "",
            int(r.pd_corrected),
        ])
    return buf.getvalue() if fh is None else None
