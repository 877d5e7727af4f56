"""Ingest the benchmark series into the two-column CSV layout.

Nothing here is redistributed: Nile comes from ``statsmodels``, the
motorcycle data from the ``rdatasets`` package (MASS ``mcycle``), and the
three TCPD / priceR series from files the user downloads.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError

SERIES_SIZES = {"motorcycle": 94, "nile": 100, "canada_co2": 215, "brent": 100, "eur_usd": 200}


def write_series(path, t, y, header=("t", "y")):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(t, y):
            w.writerow([repr(float(a)), repr(float(b))])
    return path


def nile():
    """Annual Nile flow volume, 1871-1970 (100 values)."""
    try:
        from statsmodels.datasets import nile as sm_nile
    except ImportError as exc:
        raise InputError("the Nile series needs statsmodels installed") from exc
    d = sm_nile.load_pandas().data
    return d["year"].to_numpy(float), d["volume"].to_numpy(float)


def motorcycle():
    """Head acceleration against time after impact, one value per time.

    MASS ``mcycle`` has 133 rows at 94 distinct times; repeated times are
    averaged so each time contributes a single observation.
    """
    try:
        import rdatasets
    except ImportError as exc:
        raise InputError("the motorcycle series needs the rdatasets package") from exc
    d = rdatasets.data("MASS", "mcycle")
    g = d.groupby("times", sort=True)["accel"].mean()
    return g.index.to_numpy(float), g.to_numpy(float)


def tcpd(path):
    """Read a TCPD JSON file (``time.raw`` or ``time.index`` and ``series[0].raw``)."""
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        raw = d["series"][0]["raw"]
        t = d.get("time", {}).get("index") or list(range(len(raw)))
    except (OSError, ValueError, KeyError, IndexError) as exc:
        raise InputError(f"cannot parse TCPD file {path}: {exc}") from exc
    y = np.array([np.nan if v is None else float(v) for v in raw])
    keep = np.isfinite(y)
    return np.asarray(t, dtype=float)[keep], y[keep]


BUILTIN = {"nile": nile, "motorcycle": motorcycle}


def ingest(name, out_dir, source=None, last=None):
    """Write ``<out_dir>/<name>.csv``.

    Parameters
    ----------
    name : str
        ``nile`` or ``motorcycle`` (built in), otherwise ``source`` must be
        a TCPD JSON file or a two-column CSV.
    last : int, optional
        Keep only the final ``last`` observations.
    """
    if source is None:
        if name not in BUILTIN:
            raise InputError(f"{name!r} is not built in; pass a source file")
        t, y = BUILTIN[name]()
    elif str(source).endswith(".json"):
        t, y = tcpd(source)
    else:
        from .stream import load_csv

        ds = load_csv(source, time_index=False)
        t, y = ds.X[:, 0], ds.y
    if last is not None:
        t, y = t[-last:], y[-last:]
    return write_series(Path(out_dir) / f"{name}.csv", t, y)
