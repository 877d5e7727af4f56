"""Per-cluster parameter updates.

Gibbs draws for the overall scale ``sigma2`` and the global noise scale
``k0^2``, a stepping-out slice sampler for the degrees of freedom (run on
``log nu``), and an elliptical slice sampler for ``(log theta, h)``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InputError, NumericalError
from .tp import SubsetLikelihood

LOG_NU_MIN = np.log(1e-3)
LOG_NU_MAX = np.log(1e8)


@dataclass(frozen=True)
class SliceConfig:
    """Stepping-out slice sampler controls."""

    width: float = 1.0
    max_steps_out: int = 10
    max_shrink: int = 100

    def __post_init__(self):
        if not (self.width > 0 and self.max_steps_out > 0 and self.max_shrink > 0):
            raise InputError("slice sampler settings must be positive")


@dataclass(frozen=True)
class KernelPrior:
    """Gaussian prior on ``log theta``."""

    m0: float = 0.0
    s0_sq: float = 1.0


def inv_gamma(shape, scale, rng):
    """Draw from ``Inv-Gamma(shape, scale)`` (density ∝ x^-(shape+1) e^(-scale/x))."""
    return scale / rng.gamma(shape)


def sigma2_conditional(nu, quad, n_eff):
    """Shape and scale of the inverse-gamma full conditional of ``sigma2``."""
    return 0.5 * (nu + n_eff), 0.5 * (nu + quad)


def sigma2_conditional_for(lik, p):
    """``sigma2_conditional`` from a :class:`SubsetLikelihood`.

    Under subsampling the effective count is ``b * N/b`` and the quadratic
    form is scaled by ``N/b``, matching the minibatched likelihood.
    """
    if lik.b == 0:
        return sigma2_conditional(p.nu, 0.0, 0)
    quad, _ = lik.quad_logdet(p.theta, p.h)
    return sigma2_conditional(p.nu, lik.factor * quad, lik.factor * lik.b)


def gibbs_sigma2(lik, p, rng):
    """Draw the cluster's overall scale from its inverse-gamma conditional."""
    shape, scale = sigma2_conditional_for(lik, p)
    return inv_gamma(shape, scale, rng)


def k0_squared_conditional(h):
    h = np.atleast_1d(np.asarray(h, dtype=float))
    K = h.shape[0]
    if K < 1:
        raise InputError("need at least one cluster")
    return 0.5 * (K + 1), (1.0 + float(h @ h)) / (2.0 * K)


def gibbs_k0_squared(h, rng):
    """Draw the global noise scale from ``Inv-Gamma((K+1)/2, (1+sum h^2)/(2K))``."""
    shape, scale = k0_squared_conditional(h)
    return inv_gamma(shape, scale, rng)


def nu_log_target(nu, sigma2, shape=2.0, rate=0.1, likelihood=True):
    """Unnormalised ``log p(nu | sigma2)`` under a ``Gamma(shape, rate)`` prior."""
    if nu <= 0:
        return -np.inf
    lp = (shape - 1.0) * np.log(nu) - rate * nu
    if likelihood:
        a = 0.5 * nu
        lp += a * np.log(a) - gammaln(a) - (a + 1.0) * np.log(sigma2) - a / sigma2
    return lp


def slice_sample(x0, logp, rng, cfg=SliceConfig(), lp0=None, lower=-np.inf, upper=np.inf):
    """One univariate slice-sampling transition with stepping out.

    Stepping out is capped at ``cfg.max_steps_out`` widths split randomly
    between the two sides. If the shrinkage loop exceeds ``cfg.max_shrink``
    iterations, ``x0`` is returned unchanged.

    Returns
    -------
    x, logp(x)
    """
    if lp0 is None:
        lp0 = logp(x0)
    log_y = lp0 - rng.standard_exponential()
    w = cfg.width
    left = x0 - w * rng.random()
    right = left + w
    j = int(np.floor(cfg.max_steps_out * rng.random()))
    k = cfg.max_steps_out - 1 - j
    while j > 0 and left > lower and logp(left) > log_y:
        left -= w
        j -= 1
    while k > 0 and right < upper and logp(right) > log_y:
        right += w
        k -= 1
    left, right = max(left, lower), min(right, upper)
    for _ in range(cfg.max_shrink):
        x1 = left + (right - left) * rng.random()
        lp1 = logp(x1)
        if lp1 > log_y:
            return x1, lp1
        if x1 < x0:
            left = x1
        else:
            right = x1
    return x0, lp0


def slice_sample_nu(nu, sigma2, cfg=SliceConfig(), rng=None, shape=2.0, rate=0.1,
                    likelihood=True):
    """One slice-sampling transition for the degrees of freedom.

    Targets ``Gamma(nu; shape, rate) * InvGamma(sigma2; nu/2, nu/2)`` and
    works on ``u = log nu`` with the ``+u`` Jacobian term.
    """
    if not (nu > 0 and sigma2 > 0):
        raise InputError("nu and sigma2 must be positive")

    def logp(u):
        if not LOG_NU_MIN < u < LOG_NU_MAX:
            return -np.inf
        return nu_log_target(np.exp(u), sigma2, shape, rate, likelihood) + u

    u, _ = slice_sample(np.log(nu), logp, rng, cfg, lower=LOG_NU_MIN, upper=LOG_NU_MAX)
    return float(np.exp(u))


def elliptical_slice(x0, mean, sd, loglik, rng, ll0=None, max_iter=200):
    """One elliptical slice-sampling transition.

    The prior is ``N(mean, diag(sd^2))``; ``loglik`` is the log-likelihood.
    If the angle bracket collapses, the current state is returned.

    Returns
    -------
    x, loglik(x)
    """
    x0 = np.asarray(x0, dtype=float)
    if ll0 is None:
        ll0 = loglik(x0)
    f0 = x0 - mean
    nu = sd * rng.standard_normal(x0.shape)
    log_y = ll0 - rng.standard_exponential()
    phi = rng.uniform(0.0, 2.0 * np.pi)
    lo, hi = phi - 2.0 * np.pi, phi
    for _ in range(max_iter):
        x1 = mean + f0 * np.cos(phi) + nu * np.sin(phi)
        ll1 = loglik(x1)
        if ll1 > log_y:
            return x1, ll1
        if phi < 0:
            lo = phi
        else:
            hi = phi
        if hi - lo < np.finfo(float).eps:
            break
        phi = rng.uniform(lo, hi)
    return x0, ll0


def ess_update_theta_h(lik, p, k0_squared, prior, rng):
    """Jointly update ``(log theta, h)`` by elliptical slice sampling.

    Parameters
    ----------
    lik : SubsetLikelihood
        Cluster data (or its minibatch); an empty one gives a flat likelihood.
    p : TPParams
        Current parameters; ``nu`` is held fixed.
    k0_squared : float
        Prior variance of ``h``.
    prior : KernelPrior

    Returns
    -------
    theta, h, loglik
    """
    nu = p.nu

    def loglik(v):
        if lik.b == 0:
            return 0.0
        theta = np.exp(v[0])
        if not 0.0 < theta < np.inf:
            return -np.inf
        try:
            return lik(theta, v[1], nu)
        except NumericalError:
            return -np.inf

    mean = np.array([prior.m0, 0.0])
    sd = np.array([np.sqrt(prior.s0_sq), np.sqrt(k0_squared)])
    v, ll = elliptical_slice(np.array([np.log(p.theta), p.h]), mean, sd, loglik, rng)
    return float(np.exp(v[0])), float(v[1]), ll


__all__ = [
    "KernelPrior",
    "SliceConfig",
    "SubsetLikelihood",
    "elliptical_slice",
    "ess_update_theta_h",
    "gibbs_k0_squared",
    "gibbs_sigma2",
    "inv_gamma",
    "k0_squared_conditional",
    "nu_log_target",
    "sigma2_conditional",
    "slice_sample",
    "slice_sample_nu",
]
