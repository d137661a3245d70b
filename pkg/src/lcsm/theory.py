"""Calculators for the theoretical tuning constants and risk bounds.

These are reporting aids. The scale parameters they need (sub-Gaussian
``sigma_W``, sub-exponential ``sigma_eps`` and Bernstein ``b``) are not
observable, so the fitting pipeline never uses them.
"""

import math
from dataclasses import dataclass

from lcsm.errors import InvalidInputError

__all__ = [
    "TheoryInputs",
    "lambda_subexponential",
    "lambda_subgaussian",
    "risk_bound",
    "tau",
    "theory_report",
]

LOG_MISMATCH_NOTE = (
    "sub-exponential bound: the square-root term uses log(2*p*d/nu) while tau and "
    "the second term use log(2*d/nu); both are implemented as stated"
)


@dataclass(frozen=True)
class TheoryInputs:
    """Inputs to the tuning/bound formulas.

    ``M1`` bounds the basis Frobenius norms (1 after normalization);
    ``theta_l1`` is the l1 norm of the true coefficients; ``p`` is only
    needed by the sub-exponential bound.
    """

    n: int
    d: int
    nu: float
    u_p: float
    M1: float = 1.0
    sigma_Wn: float = 0.0
    sigma_eps_n: float = 0.0
    b: float = 0.0
    theta_l1: float = 0.0
    p: int | None = None

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise InvalidInputError(f"nu must lie in (0, 1), got {self.nu}")
        if self.n <= 0 or self.d <= 0 or self.u_p <= 0 or self.M1 <= 0:
            raise InvalidInputError("n, d, u_p and M1 must be positive")
        if min(self.sigma_Wn, self.sigma_eps_n, self.b, self.theta_l1) < 0:
            raise InvalidInputError("scale parameters must be non-negative")


def tau(inp):
    return math.sqrt(inp.u_p**2 * inp.M1**2 * math.log(2 * inp.d / inp.nu) / inp.n)


def lambda_subgaussian(inp):
    return math.sqrt(2.0) * inp.sigma_Wn * inp.n * tau(inp)


def lambda_subexponential(inp):
    t = tau(inp)
    return inp.n * (math.sqrt(2.0) * inp.sigma_eps_n * t + 2.0 * inp.b * t * t)


def risk_bound(inp, regime="gauss"):
    """Upper bound on ``||Sigma_hat - Sigma||_F^2`` holding w.p. ``1 - nu``.

    ``regime="gauss"`` uses the sub-Gaussian bound, ``"subexp"`` the
    Bernstein-moment bound (requires ``inp.p``).
    """
    log2d = math.log(2 * inp.d / inp.nu)
    if regime == "gauss":
        return 4.0 * math.sqrt(2.0) * inp.sigma_Wn * inp.u_p * inp.theta_l1 * math.sqrt(inp.M1**2 * log2d / inp.n)
    if regime == "subexp":
        if inp.p is None:
            raise InvalidInputError("the sub-exponential bound needs p")
        log2pd = math.log(2 * inp.p * inp.d / inp.nu)
        first = 4.0 * math.sqrt(2.0) * inp.sigma_eps_n * inp.u_p * inp.theta_l1 * math.sqrt(inp.M1**2 * log2pd / inp.n)
        second = 8.0 * inp.b * inp.u_p**2 * inp.theta_l1 * inp.M1**2 * log2d / inp.n
        return first + second
    raise InvalidInputError(f"unknown regime {regime!r}")


def theory_report(inp):
    """Dict of every calculator value plus notes, for machine-readable output."""
    out = {
        "tau": tau(inp),
        "lambda_subgaussian": lambda_subgaussian(inp),
        "lambda_subexponential": lambda_subexponential(inp),
        "risk_bound_gauss": risk_bound(inp, "gauss"),
        "notes": [LOG_MISMATCH_NOTE],
    }
    out["risk_bound_subexp"] = risk_bound(inp, "subexp") if inp.p is not None else None
    return out
