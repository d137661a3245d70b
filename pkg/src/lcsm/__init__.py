"""Penalized covariance regression on a basis expansion.

The covariance is modelled as ``alpha_0 I + sum_j alpha_j G_j + sum_k beta_k F_k``
where ``G_j`` are known matrices (e.g. adjacency powers) and ``F_k`` span
their Frobenius orthogonal complement. Coefficients are fitted by
l1-penalized least squares with cyclic coordinate descent and the penalty
is chosen along a warm-started path by an AIC-type criterion.
"""

from lcsm.basis import (
    BasisSet,
    adjacency_powers,
    build_basis,
    check_linear_independence,
    compute_u_p,
    normalize_basis,
    penalty_mask,
    remainder_basis,
)
from lcsm.errors import (
    DegenerateDataError,
    DependencyError,
    InvalidInputError,
    LCSMError,
    NonConvergenceError,
)
from lcsm.path import PathResult, aic, fit_lcsm, fit_path, lambda_max, make_grid, pd_correct, select_optimal
from lcsm.solver import (
    SufficientStats,
    build_stats,
    build_stats_from_observations,
    empirical_risk,
    fit,
    kkt_check,
    objective,
    predict_sigma,
    soft_threshold,
)

__version__ = "0.1.0"
