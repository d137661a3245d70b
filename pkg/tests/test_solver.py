import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from lcsm.basis import build_basis, normalize_basis
from lcsm.errors import InvalidInputError, NonConvergenceError
from lcsm.path import lambda_max
from lcsm.solver import (
    build_stats,
    build_stats_from_observations,
    coordinate_update,
    empirical_risk,
    fit,
    kkt_check,
    objective,
    predict_sigma,
    soft_threshold,
)
from oracles import dense_objective, dense_risk, golden_min, naive_inner_sums, proximal_gradient, random_symmetric


def test_soft_threshold_examples():
    assert soft_threshold(5.0, 2.0) == 3.0
    assert soft_threshold(1.0, 2.0) == 0.0
    assert soft_threshold(-5.0, 2.0) == -3.0
    assert soft_threshold(2.0, 2.0) == 0.0


def test_build_stats_examples():
    bs = build_basis(d=2, q=0)
    st1 = build_stats(np.eye(2)[None], bs)
    np.testing.assert_array_equal(st1.c, [2.0])
    np.testing.assert_array_equal(st1.diag, [2.0])
    st2 = build_stats(np.stack([np.eye(2), np.eye(2)]), bs)
    np.testing.assert_array_equal(st2.c, 2 * st1.c)
    with pytest.raises(InvalidInputError):
        build_stats(np.zeros((0, 2, 2)), bs)
    with pytest.raises(InvalidInputError):
        build_stats(np.array([[[0, 1], [0, 0]]], dtype=float), bs)


def test_build_stats_vs_naive_loops(small_instance):
    bs, B, Z = small_instance
    stats = build_stats(Z, bs)
    np.testing.assert_allclose(stats.c, naive_inner_sums(Z, B), rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(stats.diag, [np.sum(M * M) for M in B], rtol=1e-12)
    assert stats.rss0 == pytest.approx(sum(np.sum(Zi * Zi) for Zi in Z), rel=1e-12)


def test_stats_from_observations_match(rng):
    bs = build_basis(given=[random_symmetric(rng, 4)], q=4)
    Y = rng.normal(size=(12, 4))
    Z = np.einsum("ni,nj->nij", Y, Y)
    a, b = build_stats(Z, bs), build_stats_from_observations(Y, bs)
    np.testing.assert_allclose(a.c, b.c, rtol=1e-12)
    assert a.rss0 == pytest.approx(b.rss0, rel=1e-12)


def test_empirical_risk(small_instance, rng):
    bs, B, Z = small_instance
    stats = build_stats(Z, bs)
    assert empirical_risk(np.zeros(bs.p), stats) == pytest.approx(stats.rss0)
    theta = rng.normal(size=bs.p)
    ref = dense_risk(theta, Z, B)
    assert abs(empirical_risk(theta, stats) - ref) <= 1e-10 * ref
    # exact fit
    one = build_stats(predict_sigma(theta, bs)[None], bs)
    assert abs(empirical_risk(theta, one)) <= 1e-9 * one.rss0


def test_objective_hand_computed():
    # basis {I_2, F} with F = swap/sqrt(2); Z = diag(3, 1), n = 1
    bs = build_basis(d=2, q=1, penalize="all")
    Z = np.diag([3.0, 1.0])[None]
    stats = build_stats(Z, bs)
    F = bs.remainder_matrices()[0]
    theta = np.array([1.5, -0.5])
    R = Z[0] - 1.5 * np.eye(2) + 0.5 * F
    risk = np.sum(R * R)
    assert objective(theta, stats, 0.0, bs.penalized) == pytest.approx(risk)
    assert objective(theta, stats, 0.7, bs.penalized) == pytest.approx(risk + 2 * 0.7 * 2.0)
    assert objective(np.zeros(2), stats, 3.0, bs.penalized) == pytest.approx(stats.rss0)


def test_coordinate_update_single_unit_basis():
    # one unit-norm penalized matrix, Z = a F  =>  theta = ST(a, lam)
    bs = build_basis(d=1, q=0, penalize="all")
    for a, lam in [(3.0, 1.0), (0.5, 1.0), (-4.0, 1.5)]:
        stats = build_stats(np.array([[[a]]]), bs)
        assert coordinate_update(0, np.zeros(1), stats, lam, bs.penalized) == pytest.approx(soft_threshold(a, lam))


def test_coordinate_update_unpenalized_intercept():
    bs = build_basis(d=3, q=0)
    c = 2.75
    stats = build_stats(np.stack([c * np.eye(3)] * 4), bs)
    assert coordinate_update(0, np.zeros(1), stats, 10.0, bs.penalized) == pytest.approx(c)


def test_coordinate_update_vs_golden_section(rng):
    for seed in range(6):
        bs, B, Z = make_instance(seed, d=4, s=2, q=3, n=6)
        stats = build_stats(Z, bs)
        theta = rng.normal(size=bs.p)
        lam = float(rng.uniform(0.1, 30.0))
        for j in range(bs.p):
            upd = coordinate_update(j, theta, stats, lam, bs.penalized)

            def f(x):
                t = theta.copy()
                t[j] = x
                return dense_objective(t, Z, B, lam, bs.penalized)

            ref = golden_min(f, upd - 50, upd + 50)
            assert abs(upd - ref) <= 1e-6


def test_fit_zero_above_lambda_max_penalize_all(small_instance):
    bs, B, Z = small_instance
    bs = bs.with_mask("all")
    stats = build_stats(Z, bs)
    lm = lambda_max(stats, bs.penalized)
    assert lm == pytest.approx(np.max(np.abs(stats.c)))
    res = fit(stats, bs, 1.0001 * lm)
    assert np.all(res.coef == 0.0)


def test_fit_orthonormal_design_closed_form(rng):
    # with only the identity given and q = full, and all penalized, every
    # coordinate decouples after normalization
    bs = normalize_basis(build_basis(d=4, penalize="all"))
    Z = np.stack([rng.normal(size=(4, 4)) for _ in range(7)])
    Z = Z + np.swapaxes(Z, 1, 2)
    stats = build_stats(Z, bs)
    n = stats.n
    for lam in (0.0, 0.5, 5.0, 50.0):
        res = fit(stats, bs, lam)
        closed = soft_threshold(stats.c / n, lam / n)
        assert np.max(np.abs(res.coef - closed)) <= 1e-12
        assert res.n_iter <= 2  # exact after the first cycle; the second confirms


def test_fit_matches_proximal_gradient(small_instance):
    bs, B, Z = small_instance
    stats = build_stats(Z, bs)
    for lam in (0.3, 3.0, 30.0):
        res = fit(stats, bs, lam)
        ref = proximal_gradient(Z, B, lam, bs.penalized)
        f_ref = dense_objective(ref, Z, B, lam, bs.penalized)
        assert res.objective - f_ref <= 1e-6 * max(1.0, abs(f_ref))
        assert kkt_check(res.coef, stats, lam, bs.penalized, 1e-4 * (1 + lam))
        assert kkt_check(ref, stats, lam, bs.penalized, 1e-4 * (1 + lam))


def test_kkt_check_examples(small_instance):
    bs, B, Z = small_instance
    bs = bs.with_mask("all")
    stats = build_stats(Z, bs)
    lm = lambda_max(stats, bs.penalized)
    assert kkt_check(np.zeros(bs.p), stats, lm, bs.penalized, 1e-8)
    res = fit(stats, bs, 0.2 * lm)
    assert kkt_check(res.coef, stats, 0.2 * lm, bs.penalized, 1e-4 * (1 + 0.2 * lm))
    bad = kkt_check(res.coef + 0.1, stats, 0.2 * lm, bs.penalized, 1e-4 * (1 + 0.2 * lm))
    assert not bad and bad.worst > 1e-4


def test_predict_sigma(small_instance, rng):
    bs, B, Z = small_instance
    e1 = np.zeros(bs.p)
    e1[0] = 1.0
    np.testing.assert_array_equal(predict_sigma(e1, bs), np.eye(4))
    np.testing.assert_array_equal(predict_sigma(np.zeros(bs.p), bs), np.zeros((4, 4)))
    theta = rng.normal(size=bs.p)
    acc = np.zeros((4, 4))
    for j in range(bs.p):
        for k in range(4):
            for l in range(4):
                acc[k, l] += theta[j] * B[j, k, l]
    np.testing.assert_allclose(predict_sigma(theta, bs), acc, rtol=1e-12, atol=1e-12)


def test_descent_is_monotone(small_instance):
    bs, B, Z = small_instance
    stats = build_stats(Z, bs)
    for lam in (0.0, 1.0, 10.0):
        res = fit(stats, bs, lam, init=np.full(bs.p, 3.0), trace=True)
        tr = np.array(res.trace)
        assert len(tr) == 1 + res.n_iter * bs.p
        assert np.all(np.diff(tr) <= 1e-9 * (1 + np.abs(tr[:-1])))
        assert tr[-1] == pytest.approx(res.objective, rel=1e-9)


def test_uniqueness_from_two_starts(small_instance, rng):
    bs, B, Z = small_instance
    stats = build_stats(Z, bs)
    for lam in (0.5, 5.0):
        a = fit(stats, bs, lam)
        b = fit(stats, bs, lam, init=rng.normal(scale=10, size=bs.p))
        assert abs(a.objective - b.objective) <= 1e-8 * max(1.0, abs(a.objective))
        assert np.max(np.abs(a.coef - b.coef)) <= 1e-5


def _dense_cd(Z, B, lam, mask, tol=1e-12, max_cycles=100_000):
    # soft-threshold update using the explicit dense residual; no sufficient statistics
    p = B.shape[0]
    n = len(Z)
    theta = np.zeros(p)
    for _ in range(max_cycles):
        prev = theta.copy()
        for j in range(p):
            gamma_minus = np.tensordot(theta, B, axes=1) - theta[j] * B[j]
            num = sum(np.sum((Zi - gamma_minus) * B[j]) for Zi in Z)
            den = n * np.sum(B[j] ** 2)
            theta[j] = soft_threshold(num / den, (lam if mask[j] else 0.0) / den)
        if np.linalg.norm(theta - prev) < tol:
            return theta
    raise RuntimeError


def test_stats_fit_equals_dense_fit(small_instance):
    bs, B, Z = small_instance
    for lam in (0.2, 4.0):
        via_stats = fit(Z, bs, lam, tol=1e-13, kkt_tol=1e-9).coef
        dense = _dense_cd(Z, B, lam, bs.penalized)
        assert np.max(np.abs(via_stats - dense)) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1000.0), st.floats(0.0, 20.0))
def test_scaling_homogeneity(seed, kappa, lam):
    bs, B, Z = make_instance(seed, d=3, s=1, q=2, n=5)
    a = fit(Z, bs, lam, tol=1e-12, kkt_tol=1e-8 * (1 + lam))
    b = fit(kappa * Z, bs, kappa * lam, tol=1e-12 * kappa, kkt_tol=1e-8 * kappa * (1 + lam))
    np.testing.assert_allclose(b.coef, kappa * a.coef, rtol=1e-7, atol=1e-8 * kappa)


def test_nonconvergence_carries_iterate(small_instance):
    bs, B, Z = small_instance
    with pytest.raises(NonConvergenceError) as err:
        fit(Z, bs, 0.1, max_iter=1)
    assert err.value.coef is not None and err.value.coef.shape == (bs.p,)


def test_fit_rejects_bad_arguments(small_instance):
    bs, B, Z = small_instance
    with pytest.raises(InvalidInputError):
        fit(Z, bs, -1.0)
    with pytest.raises(InvalidInputError):
        fit(Z, bs, 1.0, init=np.zeros(2))
