"""Dirichlet-process gating over the input space.

Inputs in each cluster are modelled as Gaussian with a normal-inverse-Wishart
prior on the mean and covariance. Integrating those out leaves multivariate
student-t predictive densities, which drive the Chinese-restaurant
assignment probabilities.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, logsumexp

from .errors import InputError, NumericalError


@dataclass(frozen=True)
class NIWPrior:
    """Normal-inverse-Wishart prior ``NIW(mu0, lambda0, Psi0, nu0)``."""

    mu0: np.ndarray
    lambda0: float
    Psi0: np.ndarray
    nu0: float

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        Psi0 = np.atleast_2d(np.asarray(self.Psi0, dtype=float))
        D = mu0.shape[0]
        if Psi0.shape != (D, D):
            raise InputError(f"Psi0 must be {D}x{D}, got {Psi0.shape}")
        if not np.allclose(Psi0, Psi0.T):
            raise InputError("Psi0 must be symmetric")
        if not self.lambda0 > 0:
            raise InputError("lambda0 must be positive")
        if not self.nu0 > D - 1:
            raise InputError(f"nu0 must exceed D - 1 = {D - 1}")
        try:
            np.linalg.cholesky(Psi0)
        except np.linalg.LinAlgError as exc:
            raise InputError("Psi0 must be positive definite") from exc
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Psi0", Psi0)

    @classmethod
    def default(cls, D, mu0=0.0, lambda0=1.0, psi0=1.0, nu0=None):
        """Weakly informative default: ``Psi0 = psi0 * I``, ``nu0 = D + 2``."""
        return cls(
            mu0=np.full(D, float(mu0)),
            lambda0=float(lambda0),
            Psi0=float(psi0) * np.eye(D),
            nu0=float(D + 2 if nu0 is None else nu0),
        )

    @property
    def dim(self):
        return self.mu0.shape[0]


@dataclass(frozen=True, eq=False)
class ClusterInputStats:
    """Count, mean and scatter matrix of the inputs assigned to a cluster."""

    n: int
    mean: np.ndarray
    scatter: np.ndarray

    @classmethod
    def empty(cls, D):
        return cls(0, np.zeros(D), np.zeros((D, D)))

    @classmethod
    def from_points(cls, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mean = X.mean(axis=0)
        r = X - mean
        return cls(X.shape[0], mean, r.T @ r)

    def posterior(self, prior):
        """Student-t predictive parameters ``(loc, scale, dof)``.

        ``scale`` already carries the ``(lambda'+1)/(lambda' nu')`` factor.
        """
        D = prior.dim
        n = self.n
        lam = prior.lambda0 + n
        dof = prior.nu0 + n - D + 1
        loc = (prior.lambda0 * prior.mu0 + n * self.mean) / lam
        d = self.mean - prior.mu0
        shrink = (prior.lambda0 * n / lam) * np.outer(d, d)
        scale = (lam + 1.0) / (lam * dof) * (prior.Psi0 + self.scatter + shrink)
        return loc, scale, dof

    @cached_property
    def _cache(self):
        return {}

    def _factor(self, prior):
        # stats are immutable, so the factorisation is cached per prior
        hit = self._cache.get(id(prior))
        if hit is not None and hit[0] is prior:
            return hit[1]
        loc, scale, dof = self.posterior(prior)
        try:
            chol = np.linalg.cholesky(scale)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("posterior scale matrix is not positive definite") from exc
        D = loc.shape[0]
        const = (
            gammaln(0.5 * (dof + D))
            - gammaln(0.5 * dof)
            - 0.5 * D * np.log(dof * np.pi)
            - np.log(np.diag(chol)).sum()
        )
        out = (loc, chol, dof, const)
        self._cache[id(prior)] = (prior, out)
        return out


def update_input_stats(stats, x):
    """Add one point to the running statistics (Welford update)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != stats.mean.shape:
        raise InputError(f"x has shape {x.shape}, expected {stats.mean.shape}")
    n = stats.n + 1
    delta = x - stats.mean
    mean = stats.mean + delta / n
    scatter = stats.scatter + np.outer(delta, x - mean)
    return ClusterInputStats(n, mean, 0.5 * (scatter + scatter.T))


def input_log_density(x, stats, prior):
    """Log student-t predictive density of ``x`` under a cluster.

    Pass ``stats=None`` for the prior predictive of a brand-new cluster.
    """
    if stats is None:
        stats = _empty_for(prior)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    loc, chol, dof, const = stats._factor(prior)
    w = solve_triangular(chol, x - loc, lower=True, check_finite=False)
    D = loc.shape[0]
    return float(const - 0.5 * (dof + D) * np.log1p(w @ w / dof))


_EMPTY = {}


def _empty_for(prior):
    hit = _EMPTY.get(id(prior))
    if hit is None or hit[0] is not prior:
        hit = (prior, ClusterInputStats.empty(prior.dim))
        _EMPTY[id(prior)] = hit
    return hit[1]


def crp_log_weights(stats, alpha, x, prior):
    """Unnormalised log CRP weights: existing clusters first, new cluster last."""
    out = np.empty(len(stats) + 1)
    for k, s in enumerate(stats):
        out[k] = np.log(s.n) + input_log_density(x, s, prior)
    # alpha can underflow to zero under a tight Gamma prior
    log_alpha = math.log(alpha) if alpha > 0 else -np.inf
    out[-1] = log_alpha + input_log_density(x, None, prior)
    return out


def crp_assignment_probabilities(stats, alpha, x, prior):
    """Normalised CRP probabilities for assigning ``x``.

    Parameters
    ----------
    stats : sequence of ClusterInputStats
        Statistics of the existing (nonempty) clusters.
    alpha : float
        Concentration parameter.
    x : array_like
        The incoming input.
    prior : NIWPrior

    Returns
    -------
    ndarray
        Length ``len(stats) + 1``; the last entry is the new-cluster
        probability.
    """
    lw = crp_log_weights(stats, alpha, x, prior)
    return np.exp(lw - logsumexp(lw))


def alpha_mixture_weight(K, i, a0, b0, rho):
    """Weight of the ``Gamma(a0 + K, .)`` component in the alpha update."""
    odds = (a0 + K - 1.0) / (i * (b0 - np.log(rho)))
    return odds / (1.0 + odds)


def sample_alpha(alpha, K, i, a0, b0, rng):
    """One auxiliary-variable Gibbs update of the DP concentration.

    Draws ``rho ~ Beta(alpha + 1, i)`` and then alpha from the two-component
    gamma mixture with rate ``b0 - log(rho)``.
    """
    if K < 1 or i < 1:
        raise InputError("sample_alpha needs K >= 1 and i >= 1")
    rho = rng.beta(alpha + 1.0, i)
    rho = max(rho, np.finfo(float).tiny)
    rate = b0 - np.log(rho)
    pi = alpha_mixture_weight(K, i, a0, b0, rho)
    shape = a0 + K if rng.random() < pi else a0 + K - 1.0
    draw = rng.gamma(shape, 1.0 / rate)
    return max(draw, np.finfo(float).tiny)
