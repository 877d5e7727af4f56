"""Datasets, the one-step-ahead evaluation protocol, and result files."""
import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .config import PriorConfig
from .errors import InputError, TPMoEError
from .predict import predict as predict_mixture
from .smc import ParticleEnsemble

STEP_COLUMNS = ("i", "x", "y_true", "pred_mean", "lower95", "upper95", "sq_err",
                "cluster", "n_eff", "resampled", "micros")
SUMMARY_KEYS = ("dataset", "n", "mse", "coverage95", "seed", "config", "runtime_s")


@dataclass
class Dataset:
    """A time series with its standardisation record.

    ``x_shift``/``x_scale`` and ``y_shift``/``y_scale`` map standardised
    values back via ``raw = value * scale + shift``.
    """

    name: str
    X: np.ndarray
    y: np.ndarray
    x_shift: np.ndarray = None
    x_scale: np.ndarray = None
    y_shift: float = 0.0
    y_scale: float = 1.0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y = np.asarray(self.y, dtype=float)
        if self.X.shape[0] != self.y.shape[0]:
            raise InputError("X and y lengths differ")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise InputError("dataset contains missing or non-finite values")
        D = self.X.shape[1]
        if self.x_shift is None:
            self.x_shift = np.zeros(D)
        if self.x_scale is None:
            self.x_scale = np.ones(D)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def raw_X(self):
        return self.X * self.x_scale + self.x_shift

    def raw_y(self):
        return self.y * self.y_scale + self.y_shift


def load_csv(path, x_col=None, y_col=None, time_index=True, name=None):
    """Read a two-column time series CSV.

    Parameters
    ----------
    path : path-like
    x_col, y_col : str, optional
        Column names; default to the first and second header fields.
    time_index : bool
        Use the 1-based row number as the input instead of ``x_col``.
    name : str, optional
        Dataset name; defaults to the file stem.

    Raises
    ------
    InputError
        Missing file, ragged rows, blank or non-numeric cells. Row numbers
        in messages count data rows from 1 (the header is row 0).
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 and (y_col is None or not time_index):
        raise InputError(f"{path}: need a time column and a value column")
    x_col = header[0] if x_col is None else x_col
    y_col = header[1] if y_col is None else y_col
    for col in (x_col, y_col):
        if col not in header:
            raise InputError(f"{path}: no column named {col!r}")
    xi, yi = header.index(x_col), header.index(y_col)
    xs, ys = [], []
    for r, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        vals = []
        for col, j in ((x_col, xi), (y_col, yi)):
            cell = row[j].strip()
            if cell == "":
                raise InputError(f"{path}: blank cell in row {r}, column {col!r}")
            try:
                vals.append(float(cell))
            except ValueError:
                raise InputError(f"{path}: non-numeric cell {cell!r} in row {r}, column {col!r}") from None
        xs.append(vals[0])
        ys.append(vals[1])
    if not ys:
        raise InputError(f"{path}: no data rows")
    X = np.arange(1, len(ys) + 1, dtype=float) if time_index else np.asarray(xs)
    return Dataset(name or path.stem, X[:, None], np.asarray(ys))


def standardize(ds):
    """Shift and scale inputs and outputs to mean 0 and (population) variance 1."""
    if ds.n < 2:
        raise InputError("standardize needs at least two observations")
    xm, xs = ds.X.mean(axis=0), ds.X.std(axis=0)
    ym, ys = ds.y.mean(), ds.y.std()
    if np.any(xs == 0) or ys == 0:
        raise InputError(f"{ds.name}: zero-variance column cannot be standardized")
    return Dataset(
        ds.name,
        (ds.X - xm) / xs,
        (ds.y - ym) / ys,
        x_shift=ds.x_shift + ds.x_scale * xm,
        x_scale=ds.x_scale * xs,
        y_shift=ds.y_shift + ds.y_scale * ym,
        y_scale=ds.y_scale * ys,
    )


def running_standardize(ds):
    """Standardise each observation with statistics of the earlier ones only.

    The first observation is centred on itself; scales fall back to 1 until
    two earlier values with nonzero spread are available.
    """
    X = np.empty_like(ds.X)
    y = np.empty_like(ds.y)
    for i in range(ds.n):
        if i == 0:
            xm, xs, ym, ys = ds.X[0], np.ones(ds.dim), ds.y[0], 1.0
        else:
            xm, ym = ds.X[:i].mean(axis=0), ds.y[:i].mean()
            xs, ys = ds.X[:i].std(axis=0), ds.y[:i].std()
            xs = np.where(xs > 0, xs, 1.0)
            ys = ys if ys > 0 else 1.0
        X[i] = (ds.X[i] - xm) / xs
        y[i] = (ds.y[i] - ym) / ys
    return Dataset(ds.name, X, y)


def prepare(ds, mode):
    """Apply the configured standardisation mode."""
    if mode == "offline":
        return standardize(ds)
    if mode == "running":
        return running_standardize(ds)
    return ds


@dataclass(frozen=True)
class RunConfig(PriorConfig):
    """Everything needed for a run: priors, SMC knobs and harness settings.

    The JSON config file is a flat object whose keys are these field names.
    """

    seed: int = 0
    repeats: int = 1
    threads: int = 1
    mc_draws: int = 4000
    predict_budget: int | None = None
    record_timing: bool = True
    standardize: str = "offline"

    def __post_init__(self):
        super().__post_init__()
        if self.repeats < 1 or self.threads < 1 or self.mc_draws < 1:
            raise InputError("repeats, threads and mc_draws must be >= 1")
        if self.standardize not in ("offline", "running", "none"):
            raise InputError("standardize must be 'offline', 'running' or 'none'")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InputError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise InputError("config must be a flat JSON object")
        return cls.from_dict(d)

    def to_dict(self):
        return asdict(self)

    def prior(self):
        keys = {f.name for f in fields(PriorConfig)}
        return PriorConfig(**{k: v for k, v in asdict(self).items() if k in keys})


@dataclass
class StepRecord:
    i: int
    x: float
    y_true: float
    pred_mean: float
    lower95: float
    upper95: float
    sq_err: float
    cluster: int
    n_eff: float
    resampled: bool
    micros: int

    def row(self):
        return [getattr(self, c) for c in STEP_COLUMNS]


class TPMoE:
    """Online model driven by :func:`run_stream`.

    Any object with ``observe(x, y)`` and ``predict(x)`` (returning
    something with ``mean``, ``lower95`` and ``upper95``) can stand in.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.ensemble = ParticleEnsemble(cfg.prior(), seed=cfg.seed, threads=cfg.threads)

    def observe(self, x, y):
        self.ensemble.observe(x, y)

    def predict(self, x):
        budget = self.cfg.predict_budget if self.cfg.predict_budget is not None else "batch"
        return predict_mixture(self.ensemble, x, n_draws=self.cfg.mc_draws, budget=budget)

    @property
    def last_cluster(self):
        return self.ensemble.map_particle().z[-1]

    @property
    def last_n_eff(self):
        return self.ensemble.last_n_eff

    @property
    def last_resampled(self):
        return self.ensemble.last_resampled

    def close(self):
        self.ensemble.close()


class StepError(TPMoEError):
    """An engine failure, tagged with the 1-based step index."""

    def __init__(self, i, cause):
        super().__init__(f"step {i}: {cause}")
        self.i = i
        self.cause = cause


def run_stream(ds, cfg, model=None):
    """Predict each observation from the strictly earlier ones, then update.

    Returns
    -------
    records : list of StepRecord
        One per predicted step ``i = 2..N``.
    summary : dict
        ``mse``, ``coverage95``, ``runtime_s`` and identifying fields.
    """
    model = TPMoE(cfg) if model is None else model
    records = []
    t0 = time.perf_counter()
    try:
        for i in range(1, ds.n + 1):
            x, y = ds.X[i - 1], float(ds.y[i - 1])
            tic = time.perf_counter()
            try:
                if i > 1:
                    pred = model.predict(x)
                model.observe(x, y)
            except TPMoEError as exc:
                raise StepError(i, exc) from exc
            micros = int(round(1e6 * (time.perf_counter() - tic))) if cfg.record_timing else 0
            if i == 1:
                continue
            n_eff = getattr(model, "last_n_eff", None)
            records.append(StepRecord(
                i=i,
                x=float(x[0]),
                y_true=y,
                pred_mean=float(pred.mean),
                lower95=float(pred.lower95),
                upper95=float(pred.upper95),
                sq_err=(float(pred.mean) - y) ** 2,
                cluster=int(getattr(model, "last_cluster", 0)),
                n_eff=float("nan") if n_eff is None else float(n_eff),
                resampled=bool(getattr(model, "last_resampled", False)),
                micros=micros,
            ))
    finally:
        if hasattr(model, "close"):
            model.close()
    runtime = time.perf_counter() - t0
    return records, summarize(records, ds, cfg, runtime)


def summarize(records, ds, cfg, runtime_s):
    if records:
        mse = float(np.mean([r.sq_err for r in records]))
        cover = float(np.mean([r.lower95 <= r.y_true <= r.upper95 for r in records]))
    else:
        mse = cover = None
    return {
        "dataset": ds.name if ds is not None else None,
        "n": ds.n if ds is not None else 0,
        "mse": mse,
        "coverage95": cover,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "runtime_s": runtime_s,
    }


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def emit_results(records, summary, out_dir):
    """Write ``steps.csv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "steps.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(STEP_COLUMNS)
            for r in records:
                w.writerow([_fmt(v) for v in r.row()])
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump({k: summary.get(k) for k in SUMMARY_KEYS}, fh, indent=2, sort_keys=False)
            fh.write("\n")
    except OSError as exc:
        raise InputError(f"cannot write results to {out}: {exc}") from exc
    return out / "steps.csv", out / "summary.json"
