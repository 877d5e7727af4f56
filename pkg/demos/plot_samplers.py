"""
Within-particle samplers
========================

The engine refreshes hyperparameters with three kinds of move: Gibbs draws
for conjugate scales, a slice sampler for the degrees of freedom and an
elliptical slice sampler for the kernel width and noise. Run without data,
each one should leave its prior unchanged.
"""

import numpy as np

from tpmoe import gibbs_k0_squared, slice_sample_nu
from tpmoe.samplers import SliceConfig

rng = np.random.default_rng(1)

# Without a likelihood the nu chain targets its Gamma(2, rate 0.1) prior.
nu, draws = 10.0, []
for _ in range(20000):
    nu = slice_sample_nu(nu, 1.0, SliceConfig(), rng, likelihood=False)
    draws.append(nu)
draws = np.array(draws[1000:])
print(f"nu: mean {draws.mean():.2f} (prior 20), var {draws.var():.1f} (prior 200)")

# k0^2 given three expert noise scales.
h = np.array([0.1, -0.3, 0.2])
k0 = np.array([gibbs_k0_squared(h, rng) for _ in range(20000)])
print(f"k0^2 | h: mean {k0.mean():.4f}, median {np.median(k0):.4f}")
