"""Command-line entry point.

    fairgap train CONFIG      one training run -> metrics.json, epoch_log.csv
    fairgap sweep CONFIG      lambda x seed grid -> sweep.csv, sweep_aggregate.csv
    fairgap bounds CSV        audit predictions (columns pred, target, group)
    fairgap gen-synth ...     write a synthetic two-group dataset CSV

Configs are JSON. Output directory precedence: --output-dir flag, then the
config's ``output_dir`` (relative to the config file), then
$FAIRGAP_OUTPUT_DIR, then ./fairgap_out.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bounds import DEFAULT_Y_BINS, feasible_region
from .data import (
    DatasetSchema,
    SyntheticSpec,
    gen_synthetic,
    load_and_prepare,
    split,
    write_dataset_csv,
)
from .errors import ConfigError, DomainError, TrainingDiverged
from .metrics import DEFAULT_TV_BINS
from .train import (
    Evaluation,
    RunConfig,
    evaluate,
    evaluate_predictions,
    lambda_sweep,
    train_model,
    write_epoch_log,
    write_sweep_csv,
)

OUTPUT_ENV = "FAIRGAP_OUTPUT_DIR"
DEFAULT_OUTPUT = "fairgap_out"

log = logging.getLogger("fairgap")


def _dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = sorted(set(cfg) - {"dataset", "split", "run", "sweep", "output_dir"})
    if unknown:
        raise ConfigError(f"{path}: unknown top-level fields {unknown}")
    if "dataset" not in cfg:
        raise ConfigError(f"{path}: missing field 'dataset'")
    ds = cfg["dataset"]
    if not isinstance(ds, dict) or ("path" in ds) == ("synthetic" in ds):
        raise ConfigError(f"{path}: dataset needs exactly one of 'path' or 'synthetic'")
    if "path" in ds:
        ds["path"] = str((path.parent / ds["path"]).resolve())
        if "schema" not in ds:
            raise ConfigError(f"{path}: dataset.schema is required with dataset.path")
    return cfg


def _apply_overrides(cfg: dict, args) -> tuple[dict, Path]:
    run = dict(cfg.get("run", {}))
    for flag, key in (("seed", "seed"), ("lam", "lam"), ("epochs", "epochs"), ("algorithm", "algorithm")):
        v = getattr(args, flag, None)
        if v is not None:
            run[key] = v
    cfg["run"] = run
    if getattr(args, "output_dir", None):
        out = Path(args.output_dir)
        cfg["output_dir"] = args.output_dir
    elif "output_dir" in cfg:
        # like dataset.path, a config-relative location; the echo keeps it as written
        out = Path(args.config).parent / cfg["output_dir"]
    else:
        cfg["output_dir"] = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
        out = Path(cfg["output_dir"])
    return cfg, out


def _field(section: str, fn, *a):
    try:
        return fn(*a)
    except ConfigError as e:
        raise ConfigError(f"{section}: {e}") from None
    except TypeError as e:
        raise ConfigError(f"{section}: {e}") from None


def prepare_data(cfg: dict):
    """Resolve the dataset section into (train, test, echo) with echo fully explicit."""
    sp = cfg.get("split", {})
    test_fraction = float(sp.get("test_fraction", 0.3))
    split_seed = int(sp.get("seed", 0))
    ds = cfg["dataset"]
    if "synthetic" in ds:
        spec = _field("dataset.synthetic", lambda d: SyntheticSpec(**d), ds["synthetic"])
        train, test = split(gen_synthetic(spec), test_fraction, split_seed)
        d_echo = {"synthetic": asdict(spec)}
    else:
        schema = _field("dataset.schema", DatasetSchema.from_dict, ds["schema"])
        train, test, raw = load_and_prepare(ds["path"], schema, test_fraction, split_seed)
        if raw.n_dropped:
            log.info("dropped %d incomplete rows", raw.n_dropped)
        d_echo = {"path": ds["path"], "schema": schema.to_dict()}
    return train, test, {"dataset": d_echo, "split": {"test_fraction": test_fraction, "seed": split_seed}}


def _feasible(ev: Evaluation) -> dict:
    r = ev.report
    a, b = ev.upper_bound, ev.lower_bound
    cap = 2.0 * max(a, b, r.err0, r.err1) or 1.0
    return feasible_region(a, b, cap).to_dict()


def _bundle(echo: dict, ev: Evaluation, **extra) -> dict:
    out = {
        "config": echo,
        "metrics": ev.report.to_dict(),
        "context": ev.context.to_dict(),
        "bounds": {
            "lower_bound": ev.lower_bound,
            "weighted_lower_bound": ev.weighted_lower_bound,
            "upper_bound": ev.upper_bound,
        },
        "feasible_region": _feasible(ev),
    }
    out.update(extra)
    return out


def cmd_train(args) -> int:
    cfg, out = _apply_overrides(load_config(args.config), args)
    run = _field("run", RunConfig.from_dict, cfg["run"])
    train, test, echo = prepare_data(cfg)
    echo.update(run=run.to_dict(), output_dir=cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    model, logs = train_model(run, train, test)
    ev = evaluate(model, test, run.y_bins)
    write_epoch_log(logs, out / "epoch_log.csv")
    bundle = _bundle(echo, ev, epoch_log="epoch_log.csv")
    _dump_json(bundle, out / "metrics.json")
    print(f"wrote {out / 'metrics.json'} and {out / 'epoch_log.csv'}")
    return 0


def cmd_sweep(args) -> int:
    cfg, out = _apply_overrides(load_config(args.config), args)
    sw = cfg.get("sweep")
    if not isinstance(sw, dict) or not sw.get("lambdas") or not sw.get("seeds"):
        raise ConfigError("sweep section with non-empty 'lambdas' and 'seeds' is required")
    lambdas = [float(v) for v in sw["lambdas"]]
    if any(v < 0 for v in lambdas):
        raise ConfigError("sweep.lambdas must be >= 0")
    seeds = [int(v) for v in sw["seeds"]]
    run = _field("run", RunConfig.from_dict, cfg["run"])
    train, test, echo = prepare_data(cfg)
    echo.update(run=run.to_dict(), sweep={"lambdas": lambdas, "seeds": seeds}, output_dir=cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    result = lambda_sweep(run, lambdas, seeds, train, test, jobs=args.jobs)
    write_sweep_csv(result, out / "sweep.csv", out / "sweep_aggregate.csv")
    failed = [r for r in result.rows if r["status"] != "ok"]
    _dump_json(
        {
            "config": echo,
            "sweep_table": "sweep.csv",
            "aggregate_table": "sweep_aggregate.csv",
            "aggregates": result.aggregates,
            "failed_cells": [{"lambda": r["lambda"], "seed": r["seed"], "status": r["status"]} for r in failed],
        },
        out / "results.json",
    )
    print(f"wrote {len(result.rows)} rows to {out / 'sweep.csv'}")
    return 1 if failed else 0


def read_predictions_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"predictions file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("pred", "target", "group") if c not in (reader.fieldnames or [])]
        if missing:
            raise DomainError(f"{path}: missing columns {missing}")
        pred, target, group, bad = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                p, t = float(row["pred"]), float(row["target"])
                g = row["group"].strip()
                if g not in ("0", "1") or not (np.isfinite(p) and np.isfinite(t)):
                    raise ValueError
            except (ValueError, TypeError, AttributeError):
                bad.append(lineno)
                continue
            pred.append(p)
            target.append(t)
            group.append(int(g))
    if bad:
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise DomainError(f"{path}: malformed rows at lines {shown}")
    if not pred:
        raise DomainError(f"{path}: no rows")
    group = np.asarray(group)
    for a in (0, 1):
        if not (group == a).any():
            raise DomainError(f"{path}: column 'group' has no rows with group {a}")
    return np.asarray(pred), np.asarray(target), group


def cmd_bounds(args) -> int:
    pred, target, group = read_predictions_csv(args.csv)
    ev = evaluate_predictions(pred, target, group, args.y_bins, args.tv_bins)
    echo = {"predictions": str(Path(args.csv).resolve()), "y_bins": args.y_bins, "tv_bins": args.tv_bins}
    text = _dump_json(_bundle(echo, ev), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_gen_synth(args) -> int:
    spec = SyntheticSpec(
        n_per_group=tuple(args.n_per_group) if len(args.n_per_group) == 2 else args.n_per_group[0],
        feature_dim=args.feature_dim,
        label_mean_shift=args.label_mean_shift,
        label_scale=tuple(args.label_scale),
        conditional_noise_scale=tuple(args.noise),
        feature_noise_scale=tuple(args.feature_noise),
        noisy_features=args.noisy_features,
        seed=args.seed,
    )
    ds = gen_synthetic(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(ds, args.out)
    print(f"wrote {ds.n} rows to {args.out}")
    return 0


def _positive_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairgap", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("config")
        sp.add_argument("--output-dir")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--algorithm", choices=["plain", "cenet", "wasserstein"])

    t = sub.add_parser("train", help="train one model and audit it")
    run_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="lambda x seed sweep")
    run_flags(s)
    s.add_argument("--jobs", type=_positive_int, default=1)
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bounds", help="audit a predictions CSV (pred, target, group)")
    b.add_argument("csv")
    b.add_argument("--out")
    b.add_argument("--y-bins", type=_positive_int, default=DEFAULT_Y_BINS)
    b.add_argument("--tv-bins", type=_positive_int, default=DEFAULT_TV_BINS)
    b.set_defaults(func=cmd_bounds)

    g = sub.add_parser("gen-synth", help="write a synthetic two-group dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--n-per-group", type=_positive_int, nargs="+", default=[1000])
    g.add_argument("--feature-dim", type=_positive_int, default=8)
    g.add_argument("--label-mean-shift", type=float, default=0.0)
    g.add_argument("--label-scale", type=float, nargs=2, default=[1.0, 1.0])
    g.add_argument("--noise", type=float, nargs=2, default=[0.1, 0.1])
    g.add_argument("--feature-noise", type=float, nargs=2, default=[0.0, 0.0])
    g.add_argument("--noisy-features", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "gen-synth" and len(args.n_per_group) > 2:
        parser.error("--n-per-group takes one or two counts")
    try:
        return args.func(args)
    except ConfigError as e:
        if args.command == "gen-synth":
            parser.error(str(e))
        print(f"config error: {e}", file=sys.stderr)
    except (FileNotFoundError, DomainError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
