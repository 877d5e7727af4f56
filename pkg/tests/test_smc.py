import math

import numpy as np
import pytest
from scipy import stats

from tpmoe import rng as rngs
from tpmoe.config import PriorConfig
from tpmoe.smc import (
    ParticleEnsemble,
    effective_sample_size,
    init_first_observation,
    resample,
    step,
    update_particle,
)


def stream_data(n, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(-1.5, 1.5, n)
    y = np.where(x < 0, np.sin(4 * x), 0.5) + 0.1 * rng.normal(size=n)
    return x, y


def run(cfg, n, seed=0, data_seed=0):
    ens = ParticleEnsemble(cfg, seed=seed)
    x, y = stream_data(n, data_seed)
    for a, b in zip(x, y):
        ens.observe([a], b)
    return ens


def test_single_particle_init_weight_one():
    ens = init_first_observation(ParticleEnsemble(PriorConfig(particles=1)), [0.3], -1.2)
    assert ens.weights.tolist() == [1.0]


def test_init_one_cluster_each():
    ens = init_first_observation(ParticleEnsemble(PriorConfig(particles=20), seed=4), [0.3], 0.5)
    assert all(p.num_clusters == 1 and p.z == [0] for p in ens.particles)
    assert ens.weights.sum() == pytest.approx(1.0, abs=1e-12)


def shared_streams(ens):
    ens.init_stream = lambda j: rngs.stream(ens.seed, rngs.INIT, 0)
    ens.particle_stream = lambda j, i: rngs.stream(ens.seed, rngs.PARTICLE, 0, i)


def test_identical_particles_uniform_weights_forever():
    ens = ParticleEnsemble(PriorConfig(particles=5), seed=2)
    shared_streams(ens)
    x, y = stream_data(25)
    for a, b in zip(x, y):
        ens.observe([a], b)
        np.testing.assert_array_equal(ens.weights, np.full(5, 0.2))
        assert not ens.last_resampled


def test_single_particle_step_weight_one():
    ens = run(PriorConfig(particles=1), 15)
    assert ens.weights.tolist() == [1.0]
    assert sum(c.n for c in ens.particles[0].clusters.values()) == 15


def test_weight_increment_desk_oracle():
    cfg = PriorConfig(particles=1, a0=1e-3, b0=1e3)
    ens = ParticleEnsemble(cfg, seed=8)
    x1, y1, x2, y2 = 0.1, 0.4, 0.35, -0.2
    ens.observe([x1], y1)
    before = ens.particles[0]
    old = before.clusters[0].params
    alpha = before.alpha
    ens.observe([x2], y2)
    p = ens.particles[0]
    assert p.z == [0, 0]
    new = p.clusters[0].params

    # NIW predictive densities of x2 (D = 1, mu0 = 0, lambda0 = 1, Psi0 = 1, nu0 = 3)
    lam, dof = 2.0, 3.0 + 1 - 1 + 1
    loc = x1 / lam
    psi = 1.0 + (1.0 * 1 / lam) * x1 ** 2
    t1 = stats.t.pdf(x2, dof, loc, math.sqrt((lam + 1) / (lam * dof) * psi))
    t0 = stats.t.pdf(x2, 3.0, 0.0, math.sqrt(2.0 / 3.0))
    log_px = math.log((1 * t1 + alpha * t0) / (1 + alpha))

    K = np.array([[1.0, math.exp(-0.5 * new.theta * (x1 - x2) ** 2)]])
    K = np.array([[1.0, K[0, 1]], [K[0, 1], 1.0]]) + abs(new.h) * np.eye(2)
    new_ll = stats.multivariate_t(np.zeros(2), K, df=new.nu).logpdf([y1, y2])
    old_ll = stats.t.logpdf(y1, old.nu, 0.0, math.sqrt(1.0 + abs(old.h)))
    assert p.last["increment"] == pytest.approx(log_px + new_ll - old_ll, rel=1e-10, abs=1e-10)
    assert p.last["log_px"] == pytest.approx(log_px, rel=1e-10)
    assert p.last["old_ll"] == pytest.approx(old_ll, rel=1e-12)


def test_normalized_weights_follow_increments():
    cfg = PriorConfig(particles=6, threshold=1e-9)
    ens = run(cfg, 8, seed=3)
    prev = ens.log_weights.copy()
    ens.observe([1.6], 0.2)
    inc = np.array([p.last["increment"] for p in ens.particles])
    expected = np.exp(prev + inc - np.max(prev + inc))
    np.testing.assert_allclose(ens.weights, expected / expected.sum(), rtol=1e-12)


def test_bookkeeping_invariants():
    cfg = PriorConfig(particles=12, batch=8)
    ens = ParticleEnsemble(cfg, seed=5)
    x, y = stream_data(40)
    for i, (a, b) in enumerate(zip(x, y), start=1):
        ens.observe([a], b)
        assert abs(ens.weights.sum() - 1.0) < 1e-12
        assert 1.0 <= ens.last_n_eff <= cfg.particles + 1e-9
        for p in ens.particles:
            assert len(p.z) == i
            assert sum(c.n for c in p.clusters.values()) == i
            for label, c in p.clusters.items():
                assert c.stats.n == c.n
                assert list(c.members) == [j for j, z in enumerate(p.z) if z == label]
            assert np.isfinite(p.log_weight)


def test_minibatch_path_exercised():
    cfg = PriorConfig(particles=4, batch=5, a0=1e-3, b0=1e3)
    ens = run(cfg, 30, seed=9)
    assert max(c.n for p in ens.particles for c in p.clusters.values()) > 5
    assert np.all(np.isfinite(ens.log_weights))


def test_particle_order_invariance():
    cfg = PriorConfig(particles=6)
    ens = run(cfg, 10, seed=1)
    X = np.vstack([ens.X, [[1.7]]])
    y = np.append(ens.y, 0.3)
    fwd = [update_particle(p, X, y, cfg, ens.niw, rngs.stream(1, 0, j, 11))
           for j, p in enumerate(ens.particles)]
    perm = [3, 0, 5, 1, 4, 2]
    back = [update_particle(ens.particles[j], X, y, cfg, ens.niw, rngs.stream(1, 0, j, 11))
            for j in perm]
    for a, j in zip(back, perm):
        assert a.log_weight == fwd[j].log_weight and a.z == fwd[j].z
        assert a.clusters.keys() == fwd[j].clusters.keys()


def test_threads_do_not_change_results():
    cfg = PriorConfig(particles=8, batch=6)
    a = run(cfg, 20, seed=2)
    b = ParticleEnsemble(cfg, seed=2, threads=3)
    for u, v in zip(*stream_data(20)):
        b.observe([u], v)
    b.close()
    np.testing.assert_array_equal(a.log_weights, b.log_weights)
    assert [p.z for p in a.particles] == [p.z for p in b.particles]


def test_step_requires_initialization():
    with pytest.raises(Exception):
        step(ParticleEnsemble(PriorConfig(particles=2)), [0.0], 0.0)


def test_nonfinite_weight_is_zeroed():
    ens = run(PriorConfig(particles=4), 3)
    ens.particles[1].log_weight = np.nan
    ens._sanitize()
    assert ens.weights[1] == 0.0 and ens.n_nonfinite == 1
    assert ens.weights.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("w,expected", [
    (np.full(7, 1 / 7), 7.0),
    (np.eye(7)[2], 1.0),
    (np.r_[0.5, 0.5, np.zeros(5)], 2.0),
])
def test_effective_sample_size(w, expected):
    assert effective_sample_size(w) == pytest.approx(expected, rel=1e-12)


def _set_weights(ens, w):
    for p, wj in zip(ens.particles, w):
        p.log_weight = math.log(wj) if wj > 0 else -np.inf


def test_resample_degenerate():
    ens = run(PriorConfig(particles=5), 4)
    target = ens.particles[3]
    _set_weights(ens, [0, 0, 0, 1, 0])
    resample(ens, np.random.default_rng(0))
    assert all(p.z == target.z and p.clusters == target.clusters for p in ens.particles)
    assert all(p is not target for p in ens.particles)
    assert ens.weights.tolist() == [0.2] * 5


def test_resample_uniform_frequencies():
    J, reps = 10, 10**4
    ens = ParticleEnsemble(PriorConfig(particles=J))
    base = run(PriorConfig(particles=J), 2).particles
    for j, p in enumerate(base):
        p.tag = j
    rng = np.random.default_rng(3)
    counts = np.zeros(J)
    for _ in range(reps):
        ens.particles = base
        _set_weights(ens, np.full(J, 1 / J))
        resample(ens, rng)
        counts += np.bincount([base.index(next(b for b in base if b.z == p.z and b.alpha == p.alpha))
                               for p in ens.particles], minlength=J)
    sd = math.sqrt(reps * J * 0.1 * 0.9)
    assert np.all(np.abs(counts - reps) < 3 * sd)


def test_resampled_copies_are_independent():
    ens = run(PriorConfig(particles=3), 5)
    _set_weights(ens, [1, 0, 0])
    resample(ens, np.random.default_rng(1))
    ens.particles[0].z.append(99)
    assert ens.particles[1].z[-1] != 99
