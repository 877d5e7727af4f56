"""Online sequential Monte Carlo over mixtures of student-t process experts.

Each particle holds a full hypothesis: cluster assignments, the DP
concentration, the global noise scale and per-cluster TP parameters. On each
new observation every particle assigns it by the CRP, refreshes the
parameters of the receiving cluster, and is reweighted by the input
evidence times the receiving cluster's likelihood ratio.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import rng as rngs
from .config import PriorConfig
from .errors import InputError
from .gating import (
    ClusterInputStats,
    crp_log_weights,
    input_log_density,
    sample_alpha,
    update_input_stats,
)
from .kernels import as_inputs
from .samplers import (
    ess_update_theta_h,
    gibbs_k0_squared,
    gibbs_sigma2,
    inv_gamma,
    slice_sample_nu,
)
from .tp import TPParams, draw_minibatch, subset_likelihood


@dataclass(frozen=True, eq=False)
class ClusterState:
    """One expert: its members, input statistics and TP parameters."""

    stats: ClusterInputStats
    params: TPParams
    members: tuple = ()

    @property
    def n(self):
        return len(self.members)


@dataclass(eq=False)
class Particle:
    """A single weighted hypothesis.

    ``clusters`` maps an integer label to an immutable :class:`ClusterState`,
    so copies made by resampling can share cluster objects.
    """

    z: list
    alpha: float
    k0_squared: float
    clusters: dict
    log_weight: float = 0.0
    next_label: int = 0
    last: dict = field(default_factory=dict)

    def copy(self):
        return Particle(list(self.z), self.alpha, self.k0_squared, dict(self.clusters),
                        self.log_weight, self.next_label, dict(self.last))

    @property
    def num_clusters(self):
        return len(self.clusters)


def prior_params(cfg, k0_squared, rng):
    """Draw fresh TP parameters for a new cluster from their priors."""
    theta = float(np.exp(cfg.m0 + np.sqrt(cfg.s0_sq) * rng.standard_normal()))
    h = float(np.sqrt(k0_squared) * rng.standard_normal())
    nu = float(rng.gamma(cfg.nu_shape, 1.0 / cfg.nu_rate))
    nu = max(nu, 1e-3)
    sigma2 = inv_gamma(0.5 * nu, 0.5 * nu, rng)
    return TPParams(theta, h, nu, sigma2)


def init_particle(X, y, cfg, niw, rng):
    """Particle after the first observation, with its unnormalised log weight."""
    alpha = float(rng.gamma(cfg.a0, 1.0 / cfg.b0))
    k0_squared = inv_gamma(cfg.k0_shape, cfg.k0_scale, rng)
    params = prior_params(cfg, k0_squared, rng)
    stats = update_input_stats(ClusterInputStats.empty(X.shape[1]), X[0])
    log_px = input_log_density(X[0], None, niw)
    log_py = subset_likelihood(y[:1], X[:1])(params.theta, params.h, params.nu)
    cluster = ClusterState(stats, params, (0,))
    return Particle([0], alpha, k0_squared, {0: cluster}, log_px + log_py, 1,
                    {"cluster": 0, "log_px": log_px, "new_ll": log_py, "old_ll": 0.0})


def update_particle(particle, X, y, cfg, niw, rng):
    """Absorb observation ``X[-1], y[-1]`` into a copy of ``particle``.

    Order of moves: assignment, concentration, ``(theta, h)``, ``k0^2``,
    ``sigma2``, ``nu``; the weight is updated last using the new parameters.
    """
    p = particle.copy()
    i = X.shape[0]  # 1-based index of the new observation
    x = X[-1]
    labels = list(p.clusters)
    lw = crp_log_weights([p.clusters[k].stats for k in labels], p.alpha, x, niw)
    log_norm = logsumexp(lw)
    log_px = log_norm - np.log(i - 1 + p.alpha)
    probs = np.exp(lw - log_norm)
    choice = rng.choice(len(lw), p=probs / probs.sum())

    if choice == len(labels):
        k = p.next_label
        p.next_label += 1
        old = ClusterState(ClusterInputStats.empty(X.shape[1]), prior_params(cfg, p.k0_squared, rng))
    else:
        k = labels[choice]
        old = p.clusters[k]
    members = old.members + (i - 1,)
    cluster = ClusterState(update_input_stats(old.stats, x), old.params, members)
    p.clusters[k] = cluster
    p.z.append(k)

    p.alpha = sample_alpha(p.alpha, len(p.clusters), i, cfg.a0, cfg.b0, rng)

    idx_arr = np.asarray(members)
    Xk, yk = X[idx_arr], y[idx_arr]
    sub = draw_minibatch(len(members), cfg.batch, rng)
    lik = subset_likelihood(yk, Xk, sub)
    if old.n == 0:
        old_ll = 0.0
    else:
        # the old data is the new minibatch with the new point removed
        if sub is None:
            old_sub = None
        else:
            old_sub = sub[sub != len(members) - 1]
        old_lik = subset_likelihood(yk[:-1], Xk[:-1], old_sub if old.n > cfg.batch else None)
        op = old.params
        old_ll = old_lik(op.theta, op.h, op.nu)

    params = cluster.params
    theta, h, _ = ess_update_theta_h(lik, params, p.k0_squared, cfg.kernel_prior, rng)
    params = replace(params, theta=theta, h=h)
    p.clusters[k] = replace(cluster, params=params)

    p.k0_squared = gibbs_k0_squared([c.params.h for c in p.clusters.values()], rng)

    sigma2 = gibbs_sigma2(lik, params, rng)
    params = replace(params, sigma2=sigma2)
    nu = slice_sample_nu(params.nu, sigma2, cfg.slice, rng, cfg.nu_shape, cfg.nu_rate)
    params = replace(params, nu=nu)
    p.clusters[k] = replace(cluster, params=params)

    new_ll = lik(params.theta, params.h, params.nu)
    increment = log_px + new_ll - old_ll
    p.log_weight = particle.log_weight + increment
    p.last = {"cluster": k, "log_px": log_px, "new_ll": new_ll, "old_ll": old_ll,
              "increment": increment, "alpha_used": particle.alpha}
    return p


def effective_sample_size(weights):
    """``1 / sum(w^2)`` for normalised weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.dot(w, w))


def normalize_log_weights(log_w):
    """Normalised weights from log weights via a max shift."""
    log_w = np.asarray(log_w, dtype=float)
    m = np.max(log_w)
    w = np.exp(log_w - m)
    return w / w.sum()


class ParticleEnsemble:
    """``J`` particles plus the shared observation history.

    Parameters
    ----------
    cfg : PriorConfig
    seed : int
        Master seed of the counter-based random streams.
    threads : int
        Worker threads for the per-particle loop. Results do not depend on it.
    """

    def __init__(self, cfg=None, seed=0, threads=1):
        self.cfg = cfg or PriorConfig()
        self.seed = int(seed)
        self.threads = int(threads)
        self.particles = []
        self.X = None
        self.y = np.zeros(0)
        self.niw = None
        self.n_nonfinite = 0
        self.n_resamples = 0
        self.last_n_eff = None
        self.last_resampled = False
        self._pool = None

    @property
    def J(self):
        return self.cfg.particles

    @property
    def n_obs(self):
        return self.y.shape[0]

    @property
    def log_weights(self):
        return np.array([p.log_weight for p in self.particles])

    @property
    def weights(self):
        return normalize_log_weights(self.log_weights)

    def particle_stream(self, j, i):
        """Generator for particle slot ``j`` at observation ``i``."""
        return rngs.stream(self.seed, rngs.PARTICLE, j, i)

    def init_stream(self, j):
        return rngs.stream(self.seed, rngs.INIT, j)

    def _map(self, fn, items):
        if self.threads <= 1 or len(items) <= 1:
            return [fn(it) for it in items]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(self.threads)
        return list(self._pool.map(fn, items))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _append(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.X is None:
            self.X = x[None, :]
            self.niw = self.cfg.niw(x.shape[0])
        else:
            if x.shape[0] != self.X.shape[1]:
                raise InputError(f"x has dimension {x.shape[0]}, expected {self.X.shape[1]}")
            self.X = np.vstack([self.X, x])
        self.y = np.append(self.y, float(y))

    def _sanitize(self):
        bad = [p for p in self.particles if not np.isfinite(p.log_weight)]
        for p in bad:
            p.log_weight = -np.inf
        self.n_nonfinite += len(bad)
        if len(bad) == len(self.particles):
            for p in self.particles:
                p.log_weight = 0.0
        # keep log weights normalised so they stay bounded over long streams
        lw = self.log_weights
        shift = logsumexp(lw)
        for p in self.particles:
            p.log_weight -= shift

    def _maybe_resample(self):
        w = self.weights
        self.last_n_eff = effective_sample_size(w)
        self.last_resampled = self.last_n_eff < self.cfg.threshold * self.J
        if self.last_resampled:
            resample(self, rngs.stream(self.seed, rngs.RESAMPLE, self.n_obs))

    def observe(self, x, y):
        """Absorb one observation (initialising on the first)."""
        if self.n_obs == 0:
            return init_first_observation(self, x, y)
        return step(self, x, y)

    def map_particle(self):
        """The particle with the largest weight (lowest index on ties)."""
        return self.particles[int(np.argmax(self.log_weights))]


def init_first_observation(ensemble, x1, y1):
    """Initialise every particle on the first observation and normalise."""
    if ensemble.n_obs:
        raise InputError("ensemble already holds observations")
    ensemble._append(x1, y1)
    X, y, cfg, niw = ensemble.X, ensemble.y, ensemble.cfg, ensemble.niw
    ensemble.particles = ensemble._map(
        lambda j: init_particle(X, y, cfg, niw, ensemble.init_stream(j)), list(range(ensemble.J)))
    ensemble._sanitize()
    ensemble._maybe_resample()
    return ensemble


def step(ensemble, x, y):
    """Process observation ``i >= 2``: move, reweight, normalise, maybe resample."""
    if ensemble.n_obs == 0:
        raise InputError("call init_first_observation first")
    ensemble._append(x, y)
    X, yy, cfg, niw = ensemble.X, ensemble.y, ensemble.cfg, ensemble.niw
    i = ensemble.n_obs

    def work(j):
        return update_particle(ensemble.particles[j], X, yy, cfg, niw, ensemble.particle_stream(j, i))

    ensemble.particles = ensemble._map(work, list(range(len(ensemble.particles))))
    ensemble._sanitize()
    ensemble._maybe_resample()
    return ensemble


def resample(ensemble, rng):
    """Multinomial resampling; every weight is reset to ``1/J``."""
    w = ensemble.weights
    J = len(ensemble.particles)
    idx = rng.choice(J, size=J, p=w)
    new = []
    for j in idx:
        p = ensemble.particles[j].copy()
        p.log_weight = -np.log(J)
        new.append(p)
    ensemble.particles = new
    ensemble.n_resamples += 1
    return ensemble

