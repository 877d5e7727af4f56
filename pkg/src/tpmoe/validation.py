"""Dataset-free property checks, each against an independent oracle.

Every check returns a :class:`Check`; ``run_all`` runs the whole suite. The
same functions back the ``validate`` CLI command and the acceptance tests.
"""
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, stats

from .config import PriorConfig
from .gating import ClusterInputStats, update_input_stats
from .samplers import (
    KernelPrior,
    SliceConfig,
    SubsetLikelihood,
    ess_update_theta_h,
    gibbs_k0_squared,
    gibbs_sigma2,
    k0_squared_conditional,
    nu_log_target,
    sigma2_conditional_for,
    slice_sample_nu,
)
from .smc import ParticleEnsemble, Particle, effective_sample_size, resample
from .stream import Dataset, RunConfig, emit_results, run_stream
from .tp import TPParams, minibatch_log_likelihood, tp_log_marginal, tp_predict


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.4g} (limit {self.limit:g}) {self.detail}".rstrip()


def _gp_logpdf(y, X, theta, noise):
    """Gaussian log density with the covariance assembled element by element."""
    n = len(y)
    C = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            d2 = sum((X[a][k] - X[b][k]) ** 2 for k in range(len(X[a])))
            C[a, b] = math.exp(-0.5 * theta * d2) + (noise if a == b else 0.0)
    return stats.multivariate_normal(np.zeros(n), C).logpdf(y)


def check_nu_limit(n_instances=100, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        N = int(rng.integers(1, 11))
        D = int(rng.integers(1, 3))
        X = rng.normal(size=(N, D))
        theta, h = float(np.exp(rng.normal())), float(rng.uniform(0.05, 1.0))
        # outputs drawn from the GP itself; the gap to the limit grows like quad^2 / nu
        C = np.exp(-0.5 * theta * ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)) + h * np.eye(N)
        y = np.linalg.cholesky(C) @ rng.normal(size=N)
        tp = tp_log_marginal(y, X, TPParams(theta, h, 1e6))
        worst = max(worst, abs(tp - _gp_logpdf(y, X, theta, h)))
    return Check("nu->inf limit matches GP log marginal", worst < 1e-3, worst, 1e-3,
                 f"max abs diff over {n_instances} instances")


def check_scale_marginalization(n_draws=10**6, seed=1, nu=5.0, y=0.7, theta=1.0, h=0.3):
    # N=1 so the covariance is 1 + |h|
    c = 1.0 + h
    s2 = stats.invgamma(0.5 * nu, scale=0.5 * nu).rvs(size=n_draws, random_state=seed)
    mc = float(np.mean(stats.norm.pdf(y, 0.0, np.sqrt(s2 * c))))
    exact = math.exp(tp_log_marginal([y], [[0.0]], TPParams(theta, h, nu)))
    rel = abs(mc - exact) / exact
    return Check("inverse-gamma scale marginalization (MC)", rel < 0.02, rel, 0.02,
                 f"MC {mc:.5f} vs closed form {exact:.5f}")


def check_chain_rule(n_instances=50, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        X = rng.normal(size=(2, 1))
        y = rng.normal(size=2)
        p = TPParams(float(np.exp(rng.normal())), float(rng.normal()), float(rng.uniform(0.5, 30)))
        joint = tp_log_marginal(y, X, p)
        first = tp_log_marginal(y[:1], X[:1], p)
        pred = tp_predict(y[:1], X[:1], X[1:], p)
        cond = stats.t.logpdf(y[1], pred.dof, pred.mean[0], math.sqrt(pred.scale[0, 0]))
        worst = max(worst, abs(joint - first - cond))
    return Check("chain rule log P(y1,y2) = log P(y1) + log P(y2|y1)", worst < 1e-8, worst, 1e-8)


def check_minibatch_exact(n_instances=200, seed=3):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n_instances):
        N = int(rng.integers(1, 30))
        B = int(rng.integers(N, N + 20))
        X = rng.normal(size=(N, 1))
        y = rng.normal(size=N)
        p = TPParams(float(np.exp(rng.normal())), float(rng.normal()), float(rng.uniform(1, 20)))
        a = minibatch_log_likelihood(y, X, p, B, rng)
        b = tp_log_marginal(y, X, p)
        mismatches += a != b
    return Check("minibatch likelihood bitwise exact when B >= N_k", mismatches == 0,
                 mismatches, 0, f"{n_instances} instances")


def check_niw_incremental(n_streams=1000, seed=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_streams):
        D = int(rng.integers(1, 4))
        n = int(rng.integers(1, 40))
        X = rng.normal(size=(n, D)) * rng.uniform(0.1, 10) + rng.normal(size=D) * 5
        s = ClusterInputStats.empty(D)
        for x in X:
            s = update_input_stats(s, x)
        mean = X.sum(axis=0) / n
        scatter = sum(np.outer(x - mean, x - mean) for x in X)
        err = max(np.max(np.abs(s.mean - mean)) / (1 + np.max(np.abs(mean))),
                  np.max(np.abs(s.scatter - scatter)) / (1 + np.max(np.abs(scatter))))
        worst = max(worst, err, abs(s.n - n))
    return Check("incremental NIW statistics equal batch recomputation", worst < 1e-10, worst, 1e-10,
                 f"{n_streams} streams")


def _ks(draws, cdf):
    return stats.kstest(draws, cdf).statistic


def check_slice_nu(n=10**5, seed=5, sigma2=1.0):
    rng = np.random.default_rng(seed)
    grid = np.concatenate([np.linspace(1e-6, 1.0, 2001), np.linspace(1.0, 400.0, 40000)[1:]])
    logd = np.array([nu_log_target(v, sigma2) for v in grid])
    dens = np.exp(logd - logd.max())
    cdf_grid = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf_grid /= cdf_grid[-1]
    draws = np.empty(n)
    nu = 10.0
    cfg = SliceConfig()
    for t in range(n):
        nu = slice_sample_nu(nu, sigma2, cfg, rng)
        draws[t] = nu
    ks = _ks(draws, lambda v: np.interp(v, grid, cdf_grid))
    return Check("slice sampler for nu: KS vs quadrature CDF", ks < 0.02, ks, 0.02, f"{n} transitions")


def check_slice_nu_prior(n=10**5, seed=6):
    rng = np.random.default_rng(seed)
    draws = np.empty(n)
    nu = 5.0
    for t in range(n):
        nu = slice_sample_nu(nu, 1.0, SliceConfig(), rng, likelihood=False)
        draws[t] = nu
    err = max(abs(draws.mean() - 20.0) / 20.0, abs(draws.var() - 200.0) / 200.0)
    return Check("slice sampler for nu: Gamma(2, 0.1) prior moments", err < 0.05, err, 0.05,
                 f"mean {draws.mean():.3f}, var {draws.var():.2f}")


def check_gibbs_k0(n=10**5, seed=7):
    rng = np.random.default_rng(seed)
    h = np.array([0.3, -1.2, 0.05])
    draws = np.array([gibbs_k0_squared(h, rng) for _ in range(n)])
    a, b = k0_squared_conditional(h)
    ks = _ks(draws, stats.invgamma(a, scale=b).cdf)
    return Check("k0^2 Gibbs draw: KS vs inverse-gamma CDF", ks < 0.02, ks, 0.02)


def check_gibbs_sigma2(n=10**5, seed=8):
    rng = np.random.default_rng(seed)
    X = np.linspace(0, 1, 6)[:, None]
    y = np.array([0.2, -0.4, 0.9, 1.1, -0.3, 0.5])
    p = TPParams(2.0, 0.4, 7.0)
    lik = SubsetLikelihood(y, X)
    draws = np.array([gibbs_sigma2(lik, p, rng) for _ in range(n)])
    # shape/scale from an explicit inverse, independent of the Cholesky path
    C = np.exp(-0.5 * p.theta * (X - X.T) ** 2) + abs(p.h) * np.eye(6)
    quad = float(y @ np.linalg.inv(C) @ y)
    ks = _ks(draws, stats.invgamma(0.5 * (p.nu + 6), scale=0.5 * (p.nu + quad)).cdf)
    return Check("sigma2 Gibbs draw: KS vs inverse-gamma CDF", ks < 0.02, ks, 0.02)


def check_ess_prior(n=10**5, seed=9, m0=0.5, s0_sq=1.5, k0_squared=0.4):
    rng = np.random.default_rng(seed)
    empty = SubsetLikelihood(np.zeros(0), np.zeros((0, 1)))
    p = TPParams(1.0, 0.0, 5.0)
    prior = KernelPrior(m0, s0_sq)
    draws = np.empty((n, 2))
    for t in range(n):
        theta, h, _ = ess_update_theta_h(empty, p, k0_squared, prior, rng)
        p = TPParams(theta, h, 5.0)
        draws[t] = (math.log(theta), h)
    errs = [
        abs(draws[:, 0].mean() - m0) / math.sqrt(s0_sq),
        abs(draws[:, 0].var() - s0_sq) / s0_sq,
        abs(draws[:, 1].mean()) / math.sqrt(k0_squared),
        abs(draws[:, 1].var() - k0_squared) / k0_squared,
    ]
    return Check("elliptical slice prior recovery (moments)", max(errs) < 0.03, max(errs), 0.03,
                 "mean errors in prior sd units, variance errors relative")


class _Token:
    def __init__(self, j, log_weight):
        self.j = j
        self.log_weight = log_weight

    def copy(self):
        return _Token(self.j, self.log_weight)


def check_resampling(reps=10**4, seed=10):
    rng = np.random.default_rng(seed)
    w = np.array([0.4, 0.25, 0.15, 0.1, 0.05, 0.03, 0.02, 0.0])
    J = w.shape[0]
    ens = ParticleEnsemble(PriorConfig(particles=J))
    counts = np.zeros(J)
    g = np.arange(J, dtype=float) ** 2
    g_after = np.empty(reps)
    for r in range(reps):
        ens.particles = [_Token(j, math.log(wj) if wj > 0 else -np.inf) for j, wj in enumerate(w)]
        resample(ens, rng)
        js = np.array([p.j for p in ens.particles])
        counts += np.bincount(js, minlength=J)
        g_after[r] = g[js].mean()
    expected = reps * J * w
    sd = np.sqrt(reps * J * w * (1 - w))
    z_counts = np.max(np.abs(counts - expected)[sd > 0] / sd[sd > 0])
    zero_ok = counts[w == 0].sum() == 0
    g_before = float(w @ g)
    z_g = abs(g_after.mean() - g_before) / (g_after.std(ddof=1) / math.sqrt(reps))
    z = max(z_counts, z_g)
    return Check("multinomial resampling unbiased (3 sigma)", bool(z < 3 and zero_ok), z, 3.0,
                 f"max |z| over copy counts and E[g]; weighted mean {g_before:.3f}")


def check_ess_identities(J=10):
    vals = [
        effective_sample_size(np.full(J, 1.0 / J)) - J,
        effective_sample_size(np.eye(J)[0]) - 1,
        effective_sample_size(np.r_[0.5, 0.5, np.zeros(J - 2)]) - 2,
    ]
    worst = max(abs(v) for v in vals)
    return Check("effective sample size identities", worst < 1e-12, worst, 1e-12)


def _synthetic(n, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1, dtype=float)
    y = np.sin(t / 6.0) + (t > n / 2) * 0.5 * np.sin(t) + 0.2 * rng.standard_normal(n)
    X = ((t - t.mean()) / t.std())[:, None]
    return Dataset("synthetic", X, (y - y.mean()) / y.std())


def check_determinism(n=40, particles=16, seed=11):
    ds = _synthetic(n)
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k, threads in enumerate((1, 1, 4)):
            cfg = RunConfig(particles=particles, batch=10, seed=seed, threads=threads,
                            mc_draws=500, record_timing=False)
            rec, summ = run_stream(ds, cfg)
            steps, _ = emit_results(rec, summ, Path(tmp) / str(k))
            outs.append(steps.read_bytes())
    same = outs[0] == outs[1] == outs[2]
    return Check("fixed seed gives byte-identical steps.csv (runs and threads)", same, float(not same),
                 0, "threads 1, 1, 4")


def check_complexity(n=480, particles=8, batch=20, window=60, seed=12):
    ds = _synthetic(n, seed=1)
    cfg = RunConfig(particles=particles, batch=batch, seed=seed, mc_draws=200, a0=0.1, b0=10.0)
    rec, _ = run_stream(ds, cfg)
    micros = np.array([r.micros for r in rec], dtype=float)
    start = 4 * batch
    tail = micros[start:]
    meds = [np.median(tail[k:k + window]) for k in range(0, len(tail) - window + 1, window)]
    ratio = max(meds) / min(meds)
    return Check("per-step time flat once clusters exceed B", ratio < 2.0, ratio, 2.0,
                 f"window medians (us): {[int(m) for m in meds]}")


SUITE = (
    check_nu_limit,
    check_scale_marginalization,
    check_chain_rule,
    check_minibatch_exact,
    check_niw_incremental,
    check_slice_nu,
    check_slice_nu_prior,
    check_gibbs_k0,
    check_gibbs_sigma2,
    check_ess_prior,
    check_resampling,
    check_ess_identities,
    check_determinism,
    check_complexity,
)


def run_all(echo=print):
    results = []
    for fn in SUITE:
        t0 = time.perf_counter()
        c = fn()
        results.append(c)
        if echo:
            echo(f"{c.line()} [{time.perf_counter() - t0:.1f}s]")
    return results
