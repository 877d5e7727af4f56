"""Mixture predictive: gate-weighted experts, averaged over particles."""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import rng as rngs
from .gating import input_log_density
from .kernels import sqdist
from .tp import tp_predict


@dataclass
class PredictiveResult:
    """Predictive distribution of a single noisy output.

    Attributes
    ----------
    weights : ndarray
        Component weights (particle weight times gate weight), summing to 1.
    components : list of StudentTPredictive
    mean : float
        Exact mixture mean.
    lower95, upper95 : float
        Monte Carlo 2.5% and 97.5% quantiles of the mixture.
    labels : list of (particle index, cluster label)
    """

    weights: np.ndarray
    components: list
    mean: float
    lower95: float
    upper95: float
    labels: list


def gate_weights(particle, x_star, niw):
    """Gate probabilities ``p_k ∝ N_k T_k(x*)`` over the existing clusters.

    Ordered like ``particle.clusters``; the new-cluster branch is excluded.
    """
    lw = np.array([np.log(c.n) + input_log_density(x_star, c.stats, niw)
                   for c in particle.clusters.values()])
    return np.exp(lw - logsumexp(lw))


def conditioning_set(members, X, x_star, budget):
    """Members used to condition an expert's predictive.

    All members if there are at most ``budget``; otherwise the ``budget``
    members closest to ``x_star`` (later observations win ties).
    """
    members = np.asarray(members)
    if budget is None or members.shape[0] <= budget:
        return members
    d = sqdist(X[members], np.atleast_2d(x_star))[:, 0]
    order = np.lexsort((-members, d))
    return np.sort(members[order[:budget]])


def expert_predictive(cluster, X, y, x_star, budget=None):
    idx = conditioning_set(cluster.members, X, x_star, budget)
    return tp_predict(y[idx], X[idx], np.atleast_2d(x_star), cluster.params)


def predict(ensemble, x_star, n_draws=4000, rng=None, budget="batch"):
    """Predictive distribution at ``x_star`` for the next output.

    Parameters
    ----------
    ensemble : ParticleEnsemble
    x_star : array_like
    n_draws : int
        Monte Carlo draws used for the 95% interval.
    rng : numpy.random.Generator, optional
        Defaults to the ensemble's counter-based prediction stream.
    budget : int, None or "batch"
        Maximum number of points each expert conditions on; ``"batch"``
        uses the minibatch size, ``None`` conditions on everything.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if budget == "batch":
        budget = ensemble.cfg.batch
    if rng is None:
        rng = rngs.stream(ensemble.seed, rngs.PREDICT, ensemble.n_obs + 1)
    X, y, niw = ensemble.X, ensemble.y, ensemble.niw
    pw = ensemble.weights
    cache = {}
    weights, comps, labels = [], [], []
    for j, (p, wj) in enumerate(zip(ensemble.particles, pw)):
        if wj == 0.0:
            continue
        gates = gate_weights(p, x_star, niw)
        for (label, c), g in zip(p.clusters.items(), gates):
            # resampled particles share ClusterState objects
            key = id(c)
            if key not in cache:
                cache[key] = (c, expert_predictive(c, X, y, x_star, budget))
            weights.append(wj * g)
            comps.append(cache[key][1])
            labels.append((j, label))
    weights = np.asarray(weights)
    weights = weights / weights.sum()
    means = np.array([c.mean[0] for c in comps])
    scales = np.array([c.scale[0, 0] for c in comps])
    dofs = np.array([c.dof for c in comps])
    mean = float(weights @ means)
    lo, hi = mixture_quantiles(weights, means, scales, dofs, n_draws, rng)
    return PredictiveResult(weights, comps, mean, lo, hi, labels)


def mixture_quantiles(weights, means, scales, dofs, n_draws, rng, q=(0.025, 0.975)):
    """Monte Carlo quantiles of a univariate student-t mixture."""
    k = rng.choice(weights.shape[0], size=n_draws, p=weights)
    draws = means[k] + np.sqrt(np.maximum(scales[k], 0.0)) * rng.standard_t(dofs[k])
    lo, hi = np.quantile(draws, q)
    return float(lo), float(hi)
