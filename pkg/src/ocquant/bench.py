"""Benchmark harness for the four experiment protocols.

Every experiment splits the dataset into stratified folds, trains on the
positives of the small fold (at most ``train_cap`` rows) and quantifies test
samples drawn from the remaining folds at each positive ratio of the grid.
All configured algorithms see the same sample in a trial, so their errors are
paired.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import CsvSchema, Dataset, SampleSpec, draw_sample, kfold_split, load_csv, mae
from .errors import ConfigError, InfeasibleSampleError, QuantError
from .mixture import OdinModel, odin_quantify, train_odin
from .persist import config_hash
from .region import (
    TiceParams,
    en_estimate,
    ensemble_min,
    extice_estimate,
    ranfoce_estimate,
    tice_estimate,
)
from .rng import SplitMix64, derive_seed
from .threshold import (
    DEFAULT_GRID,
    PatModel,
    bft_oracle,
    classify_count,
    counts_above,
    pat_quantify,
    percentile_thresholds,
    train_pat,
)

log = logging.getLogger(__name__)

DEFAULT_ROSTER = ("en", "tice", "extice", "ranfoce", "pat", "odin", "bft", "cc-fixed", "ensemble-min")
KNOWN_ALGORITHMS = DEFAULT_ROSTER + ("constant",)
DEFAULT_RATIOS = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_REPETITIONS = {1: 5, 2: 30, 3: 5, 4: 1}
DEFAULT_TEST_CAP = {1: 2000, 2: 500, 3: 2000, 4: 2000}

PARAM_KEYS = {
    "pat": {"grid", "q_min", "q_max", "q_step", "folds"},
    "odin": {"bins", "d", "folds", "splits"},
    "tice": {"folds", "max_splits", "min_labeled", "confidence", "iterations"},
    "extice": {"folds", "max_splits", "min_labeled", "confidence", "iterations"},
    "ranfoce": {"trees", "min_labeled"},
    "en": {"l2"},
    "constant": {"value"},
    "cc-fixed": {"quantile"},
    "bft": set(),
    "ensemble-min": set(),
}

# algorithms whose estimates come from the PAT model's scorer
USES_PAT = {"pat", "bft", "cc-fixed", "ensemble-min"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one benchmark run.

    ``repetitions`` and ``test_cap`` default per experiment kind (5/30/5/1
    repetitions; 2000 test rows, 500 for experiment 2).
    """

    experiment: int = 1
    algorithms: tuple[str, ...] = DEFAULT_ROSTER
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    repetitions: int | None = None
    folds: int = 5
    train_cap: int = 500
    test_cap: int | None = None
    seed: int = 0
    params: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    workers: int = 1
    dataset_path: str | None = None
    schema: CsvSchema | None = None

    def __post_init__(self) -> None:
        if self.experiment not in (1, 2, 3, 4):
            raise ConfigError(f"experiment must be 1-4, got {self.experiment}")
        unknown = [a for a in self.algorithms if a not in KNOWN_ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms: {unknown}")
        if not self.algorithms:
            raise ConfigError("no algorithms configured")
        if not self.ratios or any(not 0.0 <= r <= 1.0 for r in self.ratios):
            raise ConfigError("ratios must be a non-empty list within [0, 1]")
        if self.train_cap < 1 or (self.test_cap is not None and self.test_cap < 1):
            raise ConfigError("caps must be >= 1")
        if self.repetitions is not None and self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        for name, p in self.params.items():
            if name not in PARAM_KEYS:
                raise ConfigError(f"parameters given for unknown algorithm {name!r}")
            bad = set(p) - PARAM_KEYS[name]
            if bad:
                raise ConfigError(f"unknown parameters for {name}: {sorted(bad)}")

    @property
    def n_repetitions(self) -> int:
        return self.repetitions if self.repetitions is not None else DEFAULT_REPETITIONS[self.experiment]

    @property
    def n_test_cap(self) -> int:
        return self.test_cap if self.test_cap is not None else DEFAULT_TEST_CAP[self.experiment]

    def param(self, algorithm: str, key: str, default: Any) -> Any:
        return self.params.get(algorithm, {}).get(key, default)

    def to_dict(self) -> dict:
        """Settings that determine the results (excludes worker count)."""
        return {
            "experiment": self.experiment,
            "algorithms": list(self.algorithms),
            "ratios": list(self.ratios),
            "repetitions": self.n_repetitions,
            "folds": self.folds,
            "train_cap": self.train_cap,
            "test_cap": self.n_test_cap,
            "seed": self.seed,
            "params": {k: dict(v) for k, v in sorted(self.params.items())},
            "dataset_path": self.dataset_path,
            "schema": self.schema.to_dict() if self.schema else None,
        }

    def hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass(frozen=True)
class TrialRecord:
    """One algorithm's estimate on one test sample."""

    experiment: int
    dataset: str
    algorithm: str
    fold: int
    repetition: int
    ratio_index: int
    target_ratio: float
    true_p: float
    estimate: float
    sample_size: int
    n_labeled: int
    subclass_mix: str
    quantify_ns: int = 0
    train_ns: int = 0


TIMING_FIELDS = ("quantify_ns", "train_ns")
RESULT_FIELDS = tuple(f.name for f in fields(TrialRecord) if f.name not in TIMING_FIELDS)
KEY_FIELDS = ("dataset", "algorithm", "fold", "repetition", "ratio_index")


@dataclass
class ExperimentResult:
    experiment: int
    config_hash: str
    seed: int
    records: list[TrialRecord]
    skipped: list[dict] = field(default_factory=list)
    unit_train_ns: list[dict] = field(default_factory=list)
    bft_choice: dict = field(default_factory=dict)
    subclass_mae: dict = field(default_factory=dict)
    aggregate: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)

    def mae_by_algorithm(self) -> dict[str, float]:
        out = {}
        for alg in _algorithms_in(self.records):
            recs = [r for r in self.records if r.algorithm == alg]
            out[alg] = mae([r.estimate for r in recs], [r.true_p for r in recs])
        return out

    def summary(self) -> dict:
        algs = {}
        for alg in _algorithms_in(self.records):
            recs = [r for r in self.records if r.algorithm == alg]
            err = np.abs([r.estimate - r.true_p for r in recs])
            algs[alg] = {
                "mae": float(err.mean()),
                "std": float(err.std(ddof=1)) if len(err) > 1 else 0.0,
                "signed_error": float(np.mean([r.estimate - r.true_p for r in recs])),
                "trials": len(recs),
            }
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "algorithms": algs,
            "skipped": self.skipped,
            "bft_choice": self.bft_choice,
            "subclass_mae": self.subclass_mae,
            "aggregate": self.aggregate,
        }


def _algorithms_in(records: Sequence[TrialRecord]) -> list[str]:
    seen: dict[str, None] = {}
    for r in records:
        seen.setdefault(r.algorithm, None)
    return list(seen)


def cc_error_curve(tpr: float, fpr: float, grid: Sequence[float]) -> list[float]:
    """Predicted CC undercount ``p - p_hat = (FNR + FPR) p - FPR`` at every ratio."""
    fnr = 1.0 - tpr
    return [(fnr + fpr) * p - fpr for p in grid]


def _pat_grid(cfg: ExperimentConfig) -> tuple[float, ...]:
    p = cfg.params.get("pat", {})
    if "grid" in p:
        return tuple(float(q) for q in p["grid"])
    if {"q_min", "q_max", "q_step"} & set(p):
        lo, hi, step = p.get("q_min", 0.25), p.get("q_max", 0.75), p.get("q_step", 0.01)
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + i * step, 10) for i in range(n))
    return DEFAULT_GRID


def _tice_params(cfg: ExperimentConfig, name: str) -> TiceParams:
    p = cfg.params.get(name, {})
    return TiceParams(
        folds=p.get("folds", 5),
        max_splits=p.get("max_splits", 500),
        min_labeled=p.get("min_labeled"),
        confidence=p.get("confidence", 0.1),
        iterations=p.get("iterations", 2),
    )


def _mix_label(props: Mapping[str, float] | None) -> str:
    if not props:
        return ""
    return ";".join(f"{k}={v!r}" for k, v in sorted(props.items()))


@dataclass
class _Unit:
    scope: str  # sub-class label in experiment 3; does not enter any seed
    fold: int
    repetition: int


def _timed(fn: Callable[[], float]) -> tuple[float, int]:
    t0 = time.perf_counter_ns()
    v = fn()
    return float(v), max(1, time.perf_counter_ns() - t0)


def _run_unit(dataset: Dataset, folds: list[np.ndarray], unit: _Unit, cfg: ExperimentConfig) -> dict:
    """All ratios of one (fold, repetition): train once, quantify one sample per ratio."""
    seed = cfg.seed
    f, r, scope = unit.fold, unit.repetition, unit.scope
    x = dataset.features
    train_pool = folds[f]
    test_pool = np.concatenate([folds[g] for g in range(len(folds)) if g != f])
    pos_train = train_pool[dataset.positive[train_pool]].tolist()
    out: dict = {"records": [], "bft": [], "skipped": [], "train_ns": {}, "cc_rates": None}
    if len(pos_train) < 2:
        out["skipped"].append({"scope": scope, "fold": f, "repetition": r, "reason": "fewer than 2 training positives"})
        return out
    take = min(cfg.train_cap, len(pos_train))
    rows = sorted(SplitMix64(derive_seed(seed, "train", f, r)).sample(pos_train, take))
    labeled = x[rows]
    model_seed = derive_seed(seed, "model", f, r) & 0x7FFFFFFF
    algs = cfg.algorithms

    pat: PatModel | None = None
    odin: OdinModel | None = None
    try:
        if USES_PAT & set(algs):
            t0 = time.perf_counter_ns()
            pat = train_pat(labeled, _pat_grid(cfg), cfg.param("pat", "folds", 10), model_seed)
            out["train_ns"]["pat"] = time.perf_counter_ns() - t0
        if "odin" in algs:
            t0 = time.perf_counter_ns()
            odin = train_odin(
                labeled,
                bins=cfg.param("odin", "bins", 10),
                d=cfg.param("odin", "d", 2.0),
                k=cfg.param("odin", "folds", 10),
                seed=model_seed,
                splits=cfg.param("odin", "splits", 30),
            )
            out["train_ns"]["odin"] = time.perf_counter_ns() - t0
    except QuantError as exc:
        out["skipped"].append({"scope": scope, "fold": f, "repetition": r, "reason": f"training failed: {exc}"})
        return out

    cc_t = None
    pct_t = None
    if pat is not None:
        cc_t = float(np.quantile(pat.positive_scores, cfg.param("cc-fixed", "quantile", 0.5), method="linear"))
        pct_t = percentile_thresholds(pat)[1]
        if "cc-fixed" in algs:
            ts = pat.scorer.score_samples(x[test_pool])
            y = dataset.positive[test_pool]
            if y.any() and (~y).any():
                out["cc_rates"] = (float(np.mean(ts[y] > cc_t)), float(np.mean(ts[~y] > cc_t)))

    n_pos_test = int(dataset.positive[test_pool].sum())
    n_neg_test = len(test_pool) - n_pos_test
    subclasses = dataset.subclasses()
    for ri, p in enumerate(cfg.ratios):
        trial_seed = derive_seed(seed, "trial", f, r, ri)
        props = None
        if cfg.experiment == 2:
            if not subclasses:
                raise ConfigError("experiment 2 needs a dataset with negative sub-classes")
            w = SplitMix64(derive_seed(seed, "mix", f, r, ri)).dirichlet_flat(len(subclasses))
            props = dict(zip(subclasses, w))
            max_size = cfg.n_test_cap
        else:
            max_size = min(n_pos_test, n_neg_test, cfg.n_test_cap)
        try:
            if max_size < 1:
                raise InfeasibleSampleError("empty test pool")
            spec = SampleSpec(p, max_size, trial_seed, props)
            sample = draw_sample(dataset, test_pool, spec)
        except InfeasibleSampleError as exc:
            out["skipped"].append({"scope": scope, "fold": f, "repetition": r, "ratio_index": ri, "reason": str(exc)})
            log.warning("skipped trial %s fold=%d rep=%d ratio=%s: %s", scope, f, r, p, exc)
            continue
        unl = x[sample.indices]
        est_seed = trial_seed & 0x7FFFFFFF
        results: dict[str, tuple[float, int]] = {}

        def run(alg: str) -> tuple[float, int]:
            if alg in results:
                return results[alg]
            if alg == "pat":
                res = _timed(lambda: pat_quantify(pat, unl))
            elif alg == "odin":
                res = _timed(lambda: odin_quantify(odin, unl))
            elif alg == "cc-fixed":
                res = _timed(lambda: classify_count(pat.scorer.score_samples(unl), cc_t))
            elif alg in ("tice", "extice"):
                fn = tice_estimate if alg == "tice" else extice_estimate
                res = _timed(lambda: fn(labeled, unl, _tice_params(cfg, alg), est_seed).p_hat)
            elif alg == "ranfoce":
                res = _timed(lambda: ranfoce_estimate(
                    labeled, unl, cfg.param("ranfoce", "trees", 100), est_seed,
                    cfg.param("ranfoce", "min_labeled", None)).p_hat)
            elif alg == "en":
                res = _timed(lambda: en_estimate(labeled, unl, cfg.param("en", "l2", 1e-3)).p_hat)
            elif alg == "constant":
                value = float(cfg.param("constant", "value", 0.5))
                res = _timed(lambda: value)
            elif alg == "ensemble-min":
                a, ta = run("pat")
                b, tb = run("extice")
                res = (ensemble_min(a, b), ta + tb)
            else:
                raise ConfigError(f"no runner for {alg}")
            results[alg] = res
            return res

        mix = _mix_label(props) if props else (f"{scope}=1.0" if scope else "")
        for alg in algs:
            if alg == "bft":
                t0 = time.perf_counter_ns()
                s = np.sort(pat.scorer.score_samples(unl))
                ests = counts_above(s, pct_t) / len(s)
                qns = max(1, time.perf_counter_ns() - t0)
                out["bft"].append(ests)
                out["records"].append(TrialRecord(
                    cfg.experiment, dataset.name, "bft", f, r, ri, float(p), sample.true_ratio,
                    math.nan, sample.size, take, mix, qns, out["train_ns"].get("pat", 0),
                ))
                continue
            est, qns = run(alg)
            train_ns = 0
            if alg in USES_PAT:
                train_ns = out["train_ns"].get("pat", 0)
            elif alg == "odin":
                train_ns = out["train_ns"].get("odin", 0)
            out["records"].append(TrialRecord(
                cfg.experiment, dataset.name, alg, f, r, ri, float(p), sample.true_ratio,
                float(est), sample.size, take, mix, qns, train_ns,
            ))
    return out


def _protocol(
    dataset: Dataset,
    cfg: ExperimentConfig,
    scope: str = "",
    only_first_fold: bool = False,
    workers: int = 1,
) -> ExperimentResult:
    folds = kfold_split(dataset, cfg.folds, derive_seed(cfg.seed, "folds"))
    fold_ids = [0] if only_first_fold else list(range(cfg.folds))
    units = [_Unit(scope, f, r) for f in fold_ids for r in range(cfg.n_repetitions)]
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_unit, [dataset] * len(units), [folds] * len(units), units, [cfg] * len(units)))
    else:
        outs = [_run_unit(dataset, folds, u, cfg) for u in units]

    records: list[TrialRecord] = []
    bft_tables: list[np.ndarray] = []
    skipped: list[dict] = []
    unit_train = []
    rates = []
    for u, o in zip(units, outs):
        records.extend(o["records"])
        bft_tables.extend(o["bft"])
        skipped.extend(o["skipped"])
        unit_train.append({"scope": scope, "fold": u.fold, "repetition": u.repetition, **o["train_ns"]})
        if o["cc_rates"] is not None:
            rates.append(o["cc_rates"])

    bft_choice = {}
    final = records
    if bft_tables:
        bft_recs = [r for r in records if r.algorithm == "bft"]
        table = np.array(bft_tables)
        truth = np.array([r.true_p for r in bft_recs])
        pct, best = bft_oracle(list(np.mean(np.abs(table - truth[:, None]), axis=0)))
        bft_choice = {"percentile": pct, "mae": best, "oracle": True}
        chosen = iter(table[:, pct])
        final = [replace(r, estimate=float(next(chosen))) if r.algorithm == "bft" else r for r in records]

    figures = {}
    if rates:
        tpr = float(np.mean([a for a, _ in rates]))
        fpr = float(np.mean([b for _, b in rates]))
        pred = cc_error_curve(tpr, fpr, cfg.ratios)
        emp = []
        for ri, p in enumerate(cfg.ratios):
            errs = [r.true_p - r.estimate for r in final if r.algorithm == "cc-fixed" and r.ratio_index == ri]
            emp.append(float(np.mean(errs)) if errs else float("nan"))
        figures["cc_error"] = {"tpr": tpr, "fpr": fpr, "ratios": list(cfg.ratios),
                               "empirical": emp, "predicted": pred}
    return ExperimentResult(cfg.experiment, cfg.hash(), cfg.seed, final, skipped, unit_train, bft_choice,
                            figures=figures)


def _resolve(cfg: ExperimentConfig, dataset: Dataset | None) -> Dataset:
    if dataset is not None:
        return dataset
    if cfg.dataset_path is None or cfg.schema is None:
        raise ConfigError("config names no dataset")
    return load_csv(cfg.dataset_path, cfg.schema)


def _check_two_classes(dataset: Dataset) -> None:
    if dataset.positive.all() or not dataset.positive.any():
        raise ConfigError("dataset needs both positive and negative rows")


def run_experiment1(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentResult:
    """Sub-classes ignored; test size min(positives, negatives, cap) per fold."""
    ds = _resolve(cfg, dataset)
    _check_two_classes(ds)
    return _protocol(ds, cfg, workers=cfg.workers)


def run_experiment2(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentResult:
    """Flat-Dirichlet sub-class mix per trial; largest feasible test size up to the cap."""
    ds = _resolve(cfg, dataset)
    _check_two_classes(ds)
    if not ds.has_subclasses:
        raise ConfigError("experiment 2 needs a dataset with negative sub-classes")
    return _protocol(ds, cfg, workers=cfg.workers)


def aggregate_percentiles(values: Sequence[float]) -> dict[str, float]:
    """Median, 75th percentile (linear interpolation) and worst case."""
    v = np.asarray(values, dtype=float)
    return {
        "median": float(np.percentile(v, 50, method="linear")),
        "p75": float(np.percentile(v, 75, method="linear")),
        "worst": float(v.max()),
    }


def run_experiment3(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentResult:
    """One derived dataset per negative sub-class, experiment-1 protocol on each, then aggregate."""
    ds = _resolve(cfg, dataset)
    _check_two_classes(ds)
    names = ds.subclasses() if ds.has_subclasses else ["negative"]
    records: list[TrialRecord] = []
    skipped: list[dict] = []
    unit_train: list[dict] = []
    per_sub: dict[str, dict[str, float]] = {}
    bft: dict[str, dict] = {}
    for name in names:
        if ds.has_subclasses:
            keep = np.flatnonzero(ds.positive | (ds.subclass == name))
        else:
            keep = np.arange(ds.n)
        n_sub = int((~ds.positive[keep]).sum())
        if n_sub < cfg.folds:
            log.warning("sub-class %s has %d rows, fewer than %d folds; skipped", name, n_sub, cfg.folds)
            skipped.append({"scope": name, "reason": f"only {n_sub} rows"})
            continue
        derived = ds.subset(keep, name=f"{ds.name}[{name}]")
        res = _protocol(derived, cfg, scope=name, workers=cfg.workers)
        records.extend(res.records)
        skipped.extend(res.skipped)
        unit_train.extend(res.unit_train_ns)
        if res.bft_choice:
            bft[name] = res.bft_choice
        if res.records:
            per_sub[name] = res.mae_by_algorithm()
    aggregate = {}
    for alg in cfg.algorithms:
        vals = [m[alg] for m in per_sub.values() if alg in m]
        if vals:
            aggregate[alg] = aggregate_percentiles(vals)
    return ExperimentResult(3, cfg.hash(), cfg.seed, records, skipped, unit_train, bft,
                            subclass_mae=per_sub, aggregate=aggregate)


def timing_table(result: ExperimentResult) -> dict[str, dict[str, int]]:
    """Per-algorithm quantify time, training time (once per unit) and total, in ns."""
    table: dict[str, dict[str, int]] = {}
    for alg in _algorithms_in(result.records):
        q = sum(r.quantify_ns for r in result.records if r.algorithm == alg)
        if alg == "odin":
            t = sum(u.get("odin", 0) for u in result.unit_train_ns)
        elif alg in USES_PAT:
            t = sum(u.get("pat", 0) for u in result.unit_train_ns)
        else:
            t = 0
        table[alg] = {"quantify_ns": int(q), "train_ns": int(t), "total_ns": int(q + t)}
    return table


def run_experiment4(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentResult:
    """First fold only, one repetition, strictly sequential; adds the timing table."""
    ds = _resolve(cfg, dataset)
    _check_two_classes(ds)
    res = _protocol(ds, cfg, only_first_fold=True, workers=1)
    res.timing = timing_table(res)
    return res


RUNNERS = {1: run_experiment1, 2: run_experiment2, 3: run_experiment3, 4: run_experiment4}


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg, dataset)


def _fmt(v: Any) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def records_csv(result: ExperimentResult, columns: Sequence[str] = RESULT_FIELDS) -> str:
    """Deterministic CSV text of the trial records with a provenance header."""
    buf = io.StringIO()
    buf.write(f"# config_hash={result.config_hash} seed={result.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in result.records:
        w.writerow([_fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    """Write trials.csv, timings.csv, summary.json and any figure data files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trials": out / "trials.csv", "timings": out / "timings.csv", "summary": out / "summary.json"}
    paths["trials"].write_text(records_csv(result), encoding="utf-8")
    paths["timings"].write_text(records_csv(result, KEY_FIELDS + TIMING_FIELDS), encoding="utf-8")
    summary = result.summary()
    summary["timing"] = result.timing or timing_table(result)
    paths["summary"].write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if "cc_error" in result.figures:
        fig = result.figures["cc_error"]
        p = out / "cc_error_curve.csv"
        rows = [f"# config_hash={result.config_hash} seed={result.seed} tpr={fig['tpr']!r} fpr={fig['fpr']!r}",
                "ratio,empirical_error,predicted_error"]
        rows += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(fig["ratios"], fig["empirical"], fig["predicted"])]
        p.write_text("\n".join(rows) + "\n", encoding="utf-8")
        paths["cc_error_curve"] = p
    return paths
