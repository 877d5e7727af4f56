import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

import tpmoe.gating as gating
from tpmoe.gating import (
    ClusterInputStats,
    NIWPrior,
    alpha_mixture_weight,
    crp_assignment_probabilities,
    input_log_density,
    sample_alpha,
    update_input_stats,
)


def test_first_point():
    s = update_input_stats(ClusterInputStats.empty(2), [1.0, -2.0])
    assert s.n == 1
    np.testing.assert_array_equal(s.mean, [1.0, -2.0])
    np.testing.assert_array_equal(s.scatter, np.zeros((2, 2)))


def test_two_points():
    s = update_input_stats(update_input_stats(ClusterInputStats.empty(1), [0.0]), [2.0])
    assert s.mean.tolist() == [1.0] and s.scatter.tolist() == [[2.0]]


def test_incremental_equals_batch(rng):
    X = rng.normal(size=(20, 3)) * 4 + 7
    s = ClusterInputStats.empty(3)
    for x in X:
        s = update_input_stats(s, x)
    b = ClusterInputStats.from_points(X)
    np.testing.assert_allclose(s.mean, b.mean, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(s.scatter, b.scatter, rtol=1e-10, atol=1e-10)


def test_prior_predictive_d1():
    prior = NIWPrior.default(1, nu0=3.0)
    ref = stats.t.logpdf(0.0, df=3.0, scale=math.sqrt((1 + 1) / (1 * 3) * 1.0))
    assert input_log_density([0.0], None, prior) == pytest.approx(ref, rel=1e-12)


def test_posterior_predictive_against_niw_formulas(rng):
    # independent evaluation of the NIW predictive via scipy's multivariate t
    prior = NIWPrior(np.array([0.5, -1.0]), 2.0, np.array([[1.0, 0.2], [0.2, 0.5]]), 5.0)
    X = rng.normal(size=(7, 2))
    s = ClusterInputStats.from_points(X)
    n, xbar = 7, X.mean(0)
    lam = 2.0 + n
    dof = 5.0 + n - 2 + 1
    loc = (2.0 * prior.mu0 + n * xbar) / lam
    S = (X - xbar).T @ (X - xbar)
    Psi = prior.Psi0 + S + (2.0 * n / lam) * np.outer(xbar - prior.mu0, xbar - prior.mu0)
    shape = (lam + 1) / (lam * dof) * Psi
    x = np.array([0.3, 0.1])
    ref = stats.multivariate_t(loc, shape, df=dof).logpdf(x)
    assert input_log_density(x, s, prior) == pytest.approx(ref, rel=1e-12)


def test_density_symmetric_about_location(rng):
    prior = NIWPrior.default(2)
    s = ClusterInputStats.from_points(rng.normal(size=(5, 2)))
    loc, _, _ = s.posterior(prior)
    d = np.array([0.4, -1.3])
    assert input_log_density(loc + d, s, prior) == pytest.approx(input_log_density(loc - d, s, prior), abs=1e-12)


def test_density_concentrates_with_more_points_at_origin():
    prior = NIWPrior.default(1)
    s = ClusterInputStats.empty(1)
    prev = input_log_density([0.0], s, prior)
    for _ in range(60):
        s = update_input_stats(s, [0.0])
        cur = input_log_density([0.0], s, prior)
        assert cur > prev
        prev = cur


def test_density_integrates_to_one(rng):
    prior = NIWPrior.default(1, mu0=0.3, psi0=0.5)
    s = ClusterInputStats.from_points(rng.normal(size=(4, 1)))
    val, _ = integrate.quad(lambda v: math.exp(input_log_density([v], s, prior)), -np.inf, np.inf,
                            epsabs=1e-12, limit=200)
    assert abs(val - 1.0) < 1e-4


def test_crp_no_clusters():
    p = crp_assignment_probabilities([], 0.7, [0.0], NIWPrior.default(1))
    np.testing.assert_array_equal(p, [1.0])


def test_crp_counts_only(monkeypatch):
    monkeypatch.setattr(gating, "input_log_density", lambda x, s, prior: -1.7)
    s3 = ClusterInputStats(3, np.zeros(1), np.zeros((1, 1)))
    s1 = ClusterInputStats(1, np.zeros(1), np.zeros((1, 1)))
    p = crp_assignment_probabilities([s3, s1], 1.0, [0.0], NIWPrior.default(1))
    np.testing.assert_allclose(p, [0.6, 0.2, 0.2], rtol=1e-14)


def _clusters(rng, k, D=1):
    return [ClusterInputStats.from_points(rng.normal(size=(int(rng.integers(1, 6)), D)) + 3 * j)
            for j in range(k)]


def test_crp_log_space_matches_direct(rng):
    prior = NIWPrior.default(1)
    stats_ = _clusters(rng, 3)
    x, alpha = [1.2], 0.8
    direct = [s.n * math.exp(input_log_density(x, s, prior)) for s in stats_]
    direct.append(alpha * math.exp(input_log_density(x, None, prior)))
    direct = np.array(direct) / sum(direct)
    np.testing.assert_allclose(crp_assignment_probabilities(stats_, alpha, x, prior), direct, rtol=1e-12)


def test_crp_far_point_does_not_underflow(rng):
    p = crp_assignment_probabilities(_clusters(rng, 2), 1.0, [1e6], NIWPrior.default(1))
    assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 5), alpha=st.floats(1e-3, 1e3))
def test_crp_sums_to_one_and_relabel_invariant(seed, k, alpha):
    rng = np.random.default_rng(seed)
    prior = NIWPrior.default(1)
    stats_ = _clusters(rng, k)
    x = [float(rng.normal() * 3)]
    p = crp_assignment_probabilities(stats_, alpha, x, prior)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-12)
    perm = rng.permutation(k)
    q = crp_assignment_probabilities([stats_[j] for j in perm], alpha, x, prior)
    np.testing.assert_allclose(q[:-1], p[:-1][perm], rtol=1e-12, atol=1e-300)
    assert q[-1] == pytest.approx(p[-1], rel=1e-12)


def test_new_cluster_probability_monotone_in_alpha():
    prior = NIWPrior.default(1)
    s = [ClusterInputStats.from_points([[0.0], [0.5]])]
    alphas = np.logspace(-8, 8, 30)
    pnew = [crp_assignment_probabilities(s, a, [0.2], prior)[-1] for a in alphas]
    assert np.all(np.diff(pnew) > 0)
    assert pnew[0] < 1e-7 and pnew[-1] > 1 - 1e-7


def test_alpha_mixture_weight_worked_example():
    pi = alpha_mixture_weight(K=2, i=10, a0=1.0, b0=1.0, rho=0.5)
    odds = 2.0 / (10.0 * (1.0 - math.log(0.5)))
    assert odds == pytest.approx(0.11813, abs=1e-5)
    assert pi == pytest.approx(odds / (1 + odds), rel=1e-15)
    assert pi == pytest.approx(0.10565, abs=1e-5)


def test_sample_alpha_positive(rng):
    a = 1.0
    for _ in range(1000):
        a = sample_alpha(a, int(rng.integers(1, 5)), int(rng.integers(1, 100)), 0.5, 2.0, rng)
        assert a > 0


@pytest.mark.slow
def test_sample_alpha_stationary_distribution():
    a0, b0, K, n = 1.0, 1.0, 3, 40
    # posterior of alpha given K clusters among n points
    grid = np.linspace(1e-8, 30.0, 60001)
    logd = (stats.gamma(a0, scale=1 / b0).logpdf(grid) + (K - 1) * np.log(grid)
            + np.log(grid + n) + special.betaln(grid + 1, n))
    dens = np.exp(logd - logd.max())
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0)
    cdf /= cdf[-1]
    rng = np.random.default_rng(77)
    draws = np.empty(10**5)
    a = 1.0
    for t in range(draws.size):
        a = sample_alpha(a, K, n, a0, b0, rng)
        draws[t] = a
    ks = stats.kstest(draws, lambda v: np.interp(v, grid, cdf)).statistic
    assert ks < 0.02
