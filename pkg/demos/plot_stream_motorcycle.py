"""
Streaming one-step prediction
=============================

Observations arrive one at a time. Before each one is revealed the model
predicts it, then the particle ensemble absorbs it. This script runs the
motorcycle series if it can be ingested, and a synthetic regime switch
otherwise.
"""

import tempfile

import numpy as np

from tpmoe import RunConfig, load_csv, run_stream, standardize
from tpmoe.datasets import ingest
from tpmoe.errors import InputError
from tpmoe.stream import Dataset

try:
    ds = load_csv(ingest("motorcycle", tempfile.mkdtemp()))
except InputError:
    t = np.arange(1, 121, dtype=float)
    y = np.where(t < 60, 0.2 * np.sin(t / 4), 2 * np.sin(t / 4))
    ds = Dataset("regime_switch", t[:, None], y + 0.1 * np.random.default_rng(2).normal(size=120))

ds = standardize(ds)
cfg = RunConfig(particles=40, batch=50, seed=0)
records, summary = run_stream(ds, cfg)

print(f"{ds.name}: N={ds.n}, MSE {summary['mse']:.3f}, 95% coverage {summary['coverage95']:.2f}")
print(" i    y_true   mean    interval          experts")
for r in records[::10]:
    print(f"{r.i:3d} {r.y_true:7.3f} {r.pred_mean:7.3f}  [{r.lower95:6.2f}, {r.upper95:6.2f}]  "
          f"cluster {r.cluster}, N_eff {r.n_eff:.0f}{'  resampled' if r.resampled else ''}")
