"""Command-line front end: validate, train, quantify, bench.

Exit codes: 0 success, 2 input or configuration error, 3 estimation failure.
The log level comes from the ``OCQUANT_LOG_LEVEL`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bench
from .core import CsvSchema, load_csv, load_matrix
from .errors import (
    ConfigError,
    EmptyDatasetError,
    InvalidArgumentError,
    ParseError,
    QuantError,
    SchemaError,
    UnsupportedModeError,
)
from .mixture import OdinModel, odin_quantify, train_odin
from .persist import load_model, model_to_dict, save_model
from .region import TiceParams, en_estimate, extice_estimate, ranfoce_estimate, tice_estimate
from .threshold import DEFAULT_GRID, PatModel, pat_quantify, train_pat

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3
INPUT_ERRORS = (SchemaError, ParseError, EmptyDatasetError, ConfigError, InvalidArgumentError,
                UnsupportedModeError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError)
INDUCTIVE = ("pat", "odin")
TRANSDUCTIVE = ("tice", "extice", "ranfoce", "en")
RUN_CONFIG_KEYS = {"dataset", "experiment", "algorithms", "ratios", "repetitions", "folds", "train_cap",
                   "test_cap", "seed", "params", "workers", "output_dir"}

log = logging.getLogger("ocquant")


def _features(arg: str | None) -> list[str] | None:
    return [f.strip() for f in arg.split(",") if f.strip()] if arg else None


def _schema_from_args(args: argparse.Namespace) -> CsvSchema:
    if args.schema:
        return CsvSchema.from_dict(json.loads(Path(args.schema).read_text(encoding="utf-8")))
    if not args.label or args.positive is None:
        raise SchemaError("give --schema or both --label and --positive")
    feats = _features(args.features)
    return CsvSchema(args.label, args.positive, tuple(feats) if feats else None, args.subclass)


def cmd_validate(args: argparse.Namespace) -> int:
    schema = _schema_from_args(args)
    ds = load_csv(args.dataset, schema)
    n_pos = int(ds.positive.sum())
    report: dict[str, Any] = {"n": ds.n, "m": ds.m, "positive": n_pos, "negative": ds.n - n_pos}
    if ds.has_subclasses:
        report["subclasses"] = {s: int(np.sum(ds.subclass == s)) for s in ds.subclasses()}
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        print(f"rows: {ds.n}  features: {ds.m}")
        print(f"positive: {n_pos}  negative: {ds.n - n_pos}")
        for s, c in report.get("subclasses", {}).items():
            print(f"  sub-class {s}: {c}")
    return EXIT_OK


def _grid_from_args(args: argparse.Namespace) -> tuple[float, ...]:
    if args.q_min is None and args.q_max is None and args.q_step is None:
        return DEFAULT_GRID
    lo = 0.25 if args.q_min is None else args.q_min
    hi = 0.75 if args.q_max is None else args.q_max
    step = 0.01 if args.q_step is None else args.q_step
    if step <= 0 or hi < lo:
        raise InvalidArgumentError("invalid quantile grid bounds")
    n = int((hi - lo) / step + 1e-9) + 1
    return tuple(round(lo + i * step, 10) for i in range(n))


def cmd_train(args: argparse.Namespace) -> int:
    if args.algorithm in TRANSDUCTIVE:
        raise UnsupportedModeError(
            f"{args.algorithm} is transductive: it estimates from one labeled and one unlabeled "
            "sample together and produces no reusable model; use 'quantify' with --labeled instead"
        )
    positives = load_matrix(args.positives, _features(args.features))
    if args.algorithm == "pat":
        model = train_pat(positives, _grid_from_args(args), args.folds, args.seed)
    else:
        model = train_odin(positives, bins=args.bins, d=args.d, k=args.folds, seed=args.seed, splits=args.splits)
    save_model(model, args.out)
    print(f"wrote {args.algorithm} model to {args.out} (config_hash={model_to_dict(model)['config_hash']})")
    return EXIT_OK


def cmd_quantify(args: argparse.Namespace) -> int:
    unlabeled = load_matrix(args.unlabeled, _features(args.features))
    diag: dict[str, Any]
    if args.model:
        model = load_model(args.model)
        if unlabeled.shape[1] != model.scorer.n_features:
            raise InvalidArgumentError(
                f"model expects {model.scorer.n_features} features, input has {unlabeled.shape[1]}"
            )
        if isinstance(model, PatModel):
            p_hat = pat_quantify(model, unlabeled)
            diag = {"algorithm": "pat", "per_quantile": model.estimates(unlabeled).tolist()}
        else:
            assert isinstance(model, OdinModel)
            p_hat = odin_quantify(model, unlabeled)
            diag = {"algorithm": "odin", "limit": model.limit}
        diag["config_hash"] = model_to_dict(model)["config_hash"]
    else:
        if not args.algorithm or not args.labeled:
            raise InvalidArgumentError("give --model, or --algorithm with --labeled")
        labeled = load_matrix(args.labeled, _features(args.features))
        if args.algorithm in INDUCTIVE:
            model = train_pat(labeled, seed=args.seed) if args.algorithm == "pat" else train_odin(labeled, seed=args.seed)
            p_hat = pat_quantify(model, unlabeled) if args.algorithm == "pat" else odin_quantify(model, unlabeled)
            diag = {"algorithm": args.algorithm}
        else:
            params = TiceParams(folds=args.folds, max_splits=args.max_splits)
            if args.algorithm == "tice":
                est = tice_estimate(labeled, unlabeled, params, args.seed)
            elif args.algorithm == "extice":
                est = extice_estimate(labeled, unlabeled, params, args.seed)
            elif args.algorithm == "ranfoce":
                est = ranfoce_estimate(labeled, unlabeled, args.trees, args.seed)
            else:
                est = en_estimate(labeled, unlabeled)
            p_hat = est.p_hat
            diag = est.diagnostics()
    if args.json:
        print(json.dumps({"p_hat": p_hat, **diag}, sort_keys=True))
    else:
        print(f"{p_hat:.6f}")
    return EXIT_OK


def load_run_config(path: str | Path, seed: int | None = None, workers: int | None = None) -> tuple[bench.ExperimentConfig, Path]:
    """Parse a JSON run configuration; unknown keys are rejected."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object")
    unknown = set(doc) - RUN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "dataset" not in doc or "path" not in doc["dataset"]:
        raise ConfigError("config needs dataset.path")
    ds_doc = dict(doc["dataset"])
    ds_path = Path(ds_doc.pop("path"))
    if not ds_path.is_absolute():
        ds_path = path.parent / ds_path
    try:
        cfg = bench.ExperimentConfig(
            experiment=int(doc.get("experiment", 1)),
            algorithms=tuple(doc.get("algorithms", bench.DEFAULT_ROSTER)),
            ratios=tuple(float(r) for r in doc.get("ratios", bench.DEFAULT_RATIOS)),
            repetitions=doc.get("repetitions"),
            folds=int(doc.get("folds", 5)),
            train_cap=int(doc.get("train_cap", 500)),
            test_cap=doc.get("test_cap"),
            seed=int(seed if seed is not None else doc.get("seed", 0)),
            params=doc.get("params", {}),
            workers=int(workers if workers is not None else doc.get("workers", os.cpu_count() or 1)),
            dataset_path=str(ds_path),
            schema=CsvSchema.from_dict(ds_doc),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(doc.get("output_dir", "bench-out"))
    if not out.is_absolute():
        out = path.parent / out
    return cfg, out


def cmd_bench(args: argparse.Namespace) -> int:
    cfg, out = load_run_config(args.config, args.seed, args.workers)
    if args.out:
        out = Path(args.out)
    result = bench.run_experiment(cfg)
    paths = bench.write_outputs(result, out)
    summary = result.summary()
    if args.json:
        print(json.dumps({"outputs": {k: str(v) for k, v in paths.items()}, **summary}, sort_keys=True))
    else:
        for alg, s in summary["algorithms"].items():
            print(f"{alg:>13s}  MAE {s['mae']:.4f}  (sd {s['std']:.4f}, {s['trials']} trials)")
        print(f"outputs in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocquant", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def schema_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--schema", help="JSON file with label/positive/features/subclass")
        p.add_argument("--label", help="label column")
        p.add_argument("--positive", help="label value of the positive class")
        p.add_argument("--subclass", help="negative sub-class column")
        p.add_argument("--features", help="comma-separated feature columns (default: all others)")

    p = sub.add_parser("validate", help="load a dataset and print class counts")
    p.add_argument("dataset")
    schema_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a reusable PAT or ODIn model from positives")
    p.add_argument("--positives", required=True, help="CSV of positive rows (numeric columns)")
    p.add_argument("--algorithm", required=True, choices=INDUCTIVE + TRANSDUCTIVE)
    p.add_argument("--features")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10, help="folds for out-of-fold scores")
    p.add_argument("--q-min", type=float)
    p.add_argument("--q-max", type=float)
    p.add_argument("--q-step", type=float)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--d", type=float, default=2.0)
    p.add_argument("--splits", type=int, default=30)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("quantify", help="estimate the positive ratio of an unlabeled CSV")
    p.add_argument("--model", help="model file from 'train'")
    p.add_argument("--algorithm", choices=INDUCTIVE + TRANSDUCTIVE)
    p.add_argument("--labeled", help="CSV of labeled positives (transductive path)")
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--features")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--max-splits", type=int, default=500)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("bench", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("OCQUANT_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QuantError, np.linalg.LinAlgError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
