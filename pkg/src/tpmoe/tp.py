"""Student-t process likelihood, predictive, and minibatched likelihood."""
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import InputError
from .kernels import KernelParams, as_inputs, factorize, rbf_gram, sqdist


@dataclass(frozen=True)
class TPParams:
    """Parameters of one student-t process expert.

    ``h`` enters the covariance as ``|h| I``; ``sigma2`` is the imputed
    overall scale, which the marginal likelihood integrates out.
    """

    theta: float
    h: float
    nu: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise InputError(f"theta must be positive, got {self.theta}")
        if not self.nu > 0:
            raise InputError(f"nu must be positive, got {self.nu}")
        if not self.sigma2 > 0:
            raise InputError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def kernel(self):
        return KernelParams(self.theta)

    @property
    def noise(self):
        return abs(self.h)


@dataclass(frozen=True)
class StudentTPredictive:
    """Multivariate student-t ``T(dof, mean, scale)``."""

    dof: float
    mean: np.ndarray
    scale: np.ndarray

    @property
    def variance(self):
        """Marginal variances (``inf`` when ``dof <= 2``)."""
        d = np.diag(self.scale)
        if self.dof <= 2:
            return np.full_like(d, np.inf)
        return d * self.dof / (self.dof - 2.0)

    def logpdf(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        chol, _ = factorize(self.scale)
        return _mvt_logpdf(y - self.mean, chol, self.dof)

    def interval(self, level=0.95):
        """Central marginal interval for each output."""
        sd = np.sqrt(np.diag(self.scale))
        q = stats.t.ppf(0.5 + level / 2.0, self.dof)
        return self.mean - q * sd, self.mean + q * sd


def _mvt_logpdf(r, chol, nu):
    n = r.shape[0]
    w = solve_triangular(chol, r, lower=True, check_finite=False)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return _tp_logpdf(float(w @ w), logdet, n, nu)


def _tp_logpdf(quad, logdet, n, nu):
    return (
        -0.5 * n * np.log(nu * np.pi)
        - 0.5 * logdet
        + gammaln(0.5 * (nu + n))
        - gammaln(0.5 * nu)
        - 0.5 * (nu + n) * np.log1p(quad / nu)
    )


def _quad_logdet(y, d2, theta, noise):
    K = np.exp(-0.5 * theta * d2)
    K[np.diag_indices_from(K)] += noise
    chol, _ = factorize(K)
    w = solve_triangular(chol, y, lower=True, check_finite=False)
    return float(w @ w), 2.0 * float(np.log(np.diag(chol)).sum())


def tp_log_marginal(y, X, p):
    """Log marginal likelihood of ``y ~ T(nu, 0, K_theta(X, X) + |h| I)``."""
    y = np.asarray(y, dtype=float)
    X = as_inputs(X)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise InputError(f"y shape {y.shape} does not match X shape {X.shape}")
    if y.shape[0] == 0:
        return 0.0
    quad, logdet = _quad_logdet(y, sqdist(X), p.theta, p.noise)
    return float(_tp_logpdf(quad, logdet, y.shape[0], p.nu))


def tp_predict(y, X, X_star, p):
    """Posterior predictive of noisy outputs at ``X_star``.

    With an empty history this is the prior predictive
    ``T(nu, 0, K(X*, X*) + |h| I)``.
    """
    X_star = as_inputs(X_star)
    if X_star.shape[0] == 0:
        raise InputError("X_star is empty")
    y = np.asarray(y, dtype=float).reshape(-1)
    K22 = rbf_gram(X_star, X_star, p.theta)
    K22[np.diag_indices_from(K22)] += p.noise
    if y.shape[0] == 0:
        return StudentTPredictive(p.nu, np.zeros(X_star.shape[0]), K22)
    X = as_inputs(X)
    if X.shape[0] != y.shape[0]:
        raise InputError(f"y shape {y.shape} does not match X shape {X.shape}")
    K11 = rbf_gram(X, X, p.theta)
    K11[np.diag_indices_from(K11)] += p.noise
    chol, _ = factorize(K11)
    K12 = rbf_gram(X, X_star, p.theta)
    w = solve_triangular(chol, y, lower=True, check_finite=False)
    V = solve_triangular(chol, K12, lower=True, check_finite=False)
    mean = V.T @ w
    beta = float(w @ w)
    cond = K22 - V.T @ V
    cond = 0.5 * (cond + cond.T)
    n = y.shape[0]
    dof = p.nu + n
    return StudentTPredictive(dof, mean, (p.nu + beta) / dof * cond)


def draw_minibatch(n, batch, rng):
    """Indices of a size-``batch`` subsample drawn without replacement.

    Returns ``None`` when ``n <= batch`` (the full set is used).
    """
    if batch < 1:
        raise InputError(f"batch size must be >= 1, got {batch}")
    if n <= batch:
        return None
    return np.sort(rng.choice(n, size=batch, replace=False))


class SubsetLikelihood:
    """TP log-likelihood of a fixed (sub)sample, reusable across parameters.

    For a subsample of size ``b`` out of ``n_total`` points the noise is
    inflated to ``n_total |h| / b`` and the log-likelihood is multiplied by
    ``n_total / b``. With the full set both factors are one and the value
    is the exact marginal likelihood.
    """

    def __init__(self, y, X, n_total=None):
        self.y = np.asarray(y, dtype=float)
        self.d2 = sqdist(X) if self.y.shape[0] else np.zeros((0, 0))
        self.b = self.y.shape[0]
        self.n_total = self.b if n_total is None else int(n_total)
        self.factor = self.n_total / self.b if self.b else 1.0

    def quad_logdet(self, theta, h):
        return _quad_logdet(self.y, self.d2, theta, self.factor * abs(h))

    def __call__(self, theta, h, nu):
        if self.b == 0:
            return 0.0
        quad, logdet = self.quad_logdet(theta, h)
        if self.factor == 1.0:
            return float(_tp_logpdf(quad, logdet, self.b, nu))
        return float(self.factor * _tp_logpdf(quad, logdet, self.b, nu))


def subset_likelihood(y, X, idx=None):
    """Build a :class:`SubsetLikelihood` over ``idx`` (all points if None)."""
    y = np.asarray(y, dtype=float)
    X = as_inputs(X)
    if idx is None:
        return SubsetLikelihood(y, X)
    return SubsetLikelihood(y[idx], X[idx], n_total=y.shape[0])


def minibatch_log_likelihood(y, X, p, batch, rng):
    """Minibatched TP log-likelihood of one cluster's data.

    Exact :func:`tp_log_marginal` when the cluster has at most ``batch``
    points; otherwise a uniform subsample without replacement, noise
    inflated by ``N/B`` and the log-likelihood scaled by ``N/B``.
    """
    idx = draw_minibatch(np.asarray(y).shape[0], batch, rng)
    if idx is None:
        return tp_log_marginal(y, X, p)
    return subset_likelihood(y, X, idx)(p.theta, p.h, p.nu)
