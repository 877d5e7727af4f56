"""RBF kernel and the positive-definite linear algebra behind every likelihood."""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InputError, NumericalError

JITTER_START = 1e-8
JITTER_MAX = 1e-2


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel parameters.

    ``theta`` is the inverse squared length-scale; the kernel has no
    amplitude because the overall scale is marginalised into the TP.
    """

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise InputError(f"theta must be positive, got {self.theta}")


def rbf_kernel(x, x_prime, params):
    """Evaluate ``exp(-theta/2 * ||x - x'||^2)`` for two D-vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape or x.ndim != 1:
        raise InputError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    d = x - x_prime
    return float(np.exp(-0.5 * params.theta * np.dot(d, d)))


def as_inputs(X):
    """Coerce inputs to an (N, D) float array; 1-d input is read as D=1."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError(f"inputs must be (N, D), got shape {X.shape}")
    return X


def sqdist(X, X2=None):
    """Pairwise squared Euclidean distances between rows."""
    X = as_inputs(X)
    X2 = X if X2 is None else as_inputs(X2)
    if X.shape[1] != X2.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
    if X.shape[1] == 1:
        d = X[:, 0][:, None] - X2[:, 0][None, :]
        return d * d
    d2 = (X * X).sum(1)[:, None] + (X2 * X2).sum(1)[None, :] - 2.0 * X @ X2.T
    np.maximum(d2, 0.0, out=d2)
    if X2 is X:
        np.fill_diagonal(d2, 0.0)
    return d2


def rbf_gram(X, X2, theta):
    """Cross-covariance matrix ``K(X, X2)``."""
    return np.exp(-0.5 * theta * sqdist(X, X2))


@dataclass(frozen=True)
class CovMatrix:
    """Noisy kernel matrix together with its Cholesky factor.

    Attributes
    ----------
    matrix : ndarray
        ``K + (noise + jitter) I``, symmetric.
    chol : ndarray
        Lower Cholesky factor of ``matrix``.
    jitter : float
        Extra diagonal that had to be added for the factorisation to succeed.
    """

    matrix: np.ndarray
    chol: np.ndarray
    jitter: float = 0.0
    logdet: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "logdet", 2.0 * float(np.log(np.diag(self.chol)).sum()))

    @property
    def n(self):
        return self.matrix.shape[0]


def factorize(K):
    """Cholesky-factorise a symmetric matrix, escalating a diagonal jitter.

    The ladder starts at ``1e-8 * mean(diag)`` and grows by 10x up to
    ``1e-2 * mean(diag)``.

    Returns
    -------
    chol : ndarray
    jitter : float
        Absolute jitter added (0.0 if none was needed).
    """
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(K)))
    if not np.isfinite(scale) or scale <= 0:
        raise NumericalError("matrix has a non-positive or non-finite diagonal")
    tried = []
    level = JITTER_START
    while level <= JITTER_MAX * (1 + 1e-9):
        jitter = level * scale
        tried.append(jitter)
        try:
            return np.linalg.cholesky(K + jitter * np.eye(K.shape[0])), jitter
        except np.linalg.LinAlgError:
            level *= 10.0
    raise NumericalError(f"Cholesky failed after jitters {tried}", jitters=tried)


def build_cov(X, params, noise=0.0):
    """Build and factorise ``K_theta(X, X) + noise * I``."""
    X = as_inputs(X)
    if X.shape[0] < 1:
        raise InputError("need at least one input row")
    K = rbf_gram(X, X, params.theta)
    K[np.diag_indices_from(K)] += noise
    chol, jitter = factorize(K)
    if jitter:
        K[np.diag_indices_from(K)] += jitter
    return CovMatrix(K, chol, jitter)


def solve_and_logdet(C, y):
    """Return ``(y' C^-1 y, log|C|, C^-1 y)`` from the cached factor."""
    y = np.asarray(y, dtype=float)
    if y.shape != (C.n,):
        raise InputError(f"y has shape {y.shape}, expected ({C.n},)")
    w = solve_triangular(C.chol, y, lower=True, check_finite=False)
    solved = solve_triangular(C.chol.T, w, lower=False, check_finite=False)
    return float(w @ w), C.logdet, solved
