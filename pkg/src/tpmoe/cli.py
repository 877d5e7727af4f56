"""Command line: ``tpmoe run | bench | validate | ingest``.

Exit codes: 0 success, 1 input error, 2 numerical failure (including a
failed validation check).
"""
import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import InputError, NumericalError
from .stream import RunConfig, StepError, emit_results, load_csv, prepare, run_stream

FLAG_ALIASES = {"particles": ["-J"], "batch": ["-B"]}


def _bool(s):
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s}")


def _opt_number(kind):
    def parse(s):
        return None if s.lower() in ("none", "null") else kind(s)
    return parse


def _add_config_flags(p):
    g = p.add_argument_group("config overrides (same names as the JSON keys)")
    for f in fields(RunConfig):
        default = f.default
        if f.type in (bool, "bool"):
            kind = _bool
        elif f.name in ("nu0",):
            kind = _opt_number(float)
        elif f.name in ("predict_budget",):
            kind = _opt_number(int)
        elif isinstance(default, int):
            kind = int
        elif isinstance(default, float):
            kind = float
        else:
            kind = str
        g.add_argument(f"--{f.name}", *FLAG_ALIASES.get(f.name, []), dest=f.name, type=kind,
                       default=argparse.SUPPRESS, help=f"default: {default}")


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="two-column CSV with a header")
    p.add_argument("--time-col", default=None, help="time column (default: first)")
    p.add_argument("--value-col", default=None, help="value column (default: second)")
    p.add_argument("--raw-time", action="store_true",
                   help="use the time column as input instead of the 1-based index")
    p.add_argument("--config", default=None, help="flat JSON config file")
    p.add_argument("--out", default="results", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="tpmoe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one streaming run on one dataset")
    _add_data_flags(run)
    _add_config_flags(run)

    bench = sub.add_parser("bench", help="repeated runs over consecutive seeds")
    _add_data_flags(bench)
    _add_config_flags(bench)

    val = sub.add_parser("validate", help="run the dataset-free property checks")
    val.add_argument("--only", nargs="*", default=None, help="substring filter on check names")

    ing = sub.add_parser("ingest", help="write a benchmark series as CSV")
    ing.add_argument("name", help="nile, motorcycle, or any name when --source is given")
    ing.add_argument("--source", default=None, help="TCPD JSON or two-column CSV")
    ing.add_argument("--last", type=int, default=None, help="keep the final N observations")
    ing.add_argument("--out", default="data")
    return parser


def load_config(args):
    base = RunConfig.from_json(args.config).to_dict() if args.config else {}
    for f in fields(RunConfig):
        if hasattr(args, f.name):
            base[f.name] = getattr(args, f.name)
    return RunConfig.from_dict(base)


def _dataset(args, cfg):
    ds = load_csv(args.data, x_col=args.time_col, y_col=args.value_col,
                  time_index=not args.raw_time)
    return prepare(ds, cfg.standardize)


def cmd_run(args):
    cfg = load_config(args)
    ds = _dataset(args, cfg)
    records, summary = run_stream(ds, cfg)
    emit_results(records, summary, args.out)
    print(f"{ds.name}: n={ds.n} mse={summary['mse']:.4f} "
          f"coverage95={summary['coverage95']:.3f} runtime={summary['runtime_s']:.1f}s")
    return 0


def cmd_bench(args):
    cfg = load_config(args)
    ds = _dataset(args, cfg)
    out = Path(args.out)
    runs = []
    for r in range(cfg.repeats):
        seed_cfg = RunConfig.from_dict({**cfg.to_dict(), "seed": cfg.seed + r})
        records, summary = run_stream(ds, seed_cfg)
        emit_results(records, summary, out / f"seed_{seed_cfg.seed}")
        runs.append(summary)
        print(f"seed {seed_cfg.seed}: mse={summary['mse']:.4f} runtime={summary['runtime_s']:.1f}s")
    mse = np.array([s["mse"] for s in runs])
    se = float(mse.std(ddof=1) / np.sqrt(len(mse))) if len(mse) > 1 else 0.0
    report = {
        "dataset": ds.name,
        "n": ds.n,
        "seeds": [s["seed"] for s in runs],
        "mse": mse.tolist(),
        "mse_mean": float(mse.mean()),
        "mse_se": se,
        "coverage95_mean": float(np.mean([s["coverage95"] for s in runs])),
        "runtime_s": float(sum(s["runtime_s"] for s in runs)),
        "config": cfg.to_dict(),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(f"{ds.name}: mse {report['mse_mean']:.3f} ({se:.3f}) over {len(mse)} seeds")
    return 0


def cmd_validate(args):
    from . import validation

    failed = 0
    for fn in validation.SUITE:
        if args.only and not any(s in fn.__name__ for s in args.only):
            continue
        c = fn()
        print(c.line(), flush=True)
        failed += not c.passed
    return 2 if failed else 0


def cmd_ingest(args):
    from .datasets import ingest

    path = ingest(args.name, args.out, source=args.source, last=args.last)
    print(path)
    return 0


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "validate": cmd_validate, "ingest": cmd_ingest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, StepError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
