"""
Student-t process likelihood and prediction
===========================================

A student-t process behaves like a Gaussian process whose overall scale
is unknown. The marginal likelihood is heavier tailed, and the predictive
variance grows when the observed outputs are larger than the kernel
expects.
"""

import numpy as np
from scipy import stats

from tpmoe import TPParams, tp_log_marginal, tp_predict

rng = np.random.default_rng(0)
X = np.linspace(0, 3, 12)[:, None]
y = np.sin(2 * X[:, 0]) + 0.1 * rng.normal(size=12)

# Large nu recovers the Gaussian process.
for nu in (3.0, 30.0, 1e6):
    p = TPParams(theta=2.0, h=0.05, nu=nu)
    print(f"nu={nu:>9g}  log marginal {tp_log_marginal(y, X, p):9.4f}")

K = np.exp(-0.5 * 2.0 * (X - X.T) ** 2) + 0.05 * np.eye(12)
print("GP log marginal        ", round(stats.multivariate_normal(np.zeros(12), K).logpdf(y), 4))

# Same data scaled up by 5: the t predictive widens, the GP would not.
X_star = np.array([[1.5], [3.5]])
p = TPParams(theta=2.0, h=0.05, nu=5.0)
for scale in (1.0, 5.0):
    pred = tp_predict(scale * y, X, X_star, p)
    lo, hi = pred.interval(0.95)
    print(f"scale {scale}: mean {np.round(pred.mean, 3)}  95% width {np.round(hi - lo, 3)}")
