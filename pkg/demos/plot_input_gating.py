"""
Input gating with a Chinese restaurant process
==============================================

Each expert owns a region of input space. Its inputs get a
normal-inverse-Wishart prior, so the probability that a new point joins an
expert combines the expert's size with a student-t density of the input.
"""

import numpy as np

from tpmoe import ClusterInputStats, NIWPrior, crp_assignment_probabilities

prior = NIWPrior.default(1)
left = ClusterInputStats.from_points(np.array([[-2.1], [-1.9], [-2.0], [-2.2]]))
right = ClusterInputStats.from_points(np.array([[1.8], [2.2]]))

for x in (-2.0, 0.0, 2.0, 8.0):
    p = crp_assignment_probabilities([left, right], alpha=1.0, x=[x], prior=prior)
    print(f"x={x:5.1f}  left {p[0]:.3f}  right {p[1]:.3f}  new {p[2]:.3f}")
