"""Dataset model, CSV ingestion, fold splitting, test-sample drawing and MAE."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    InfeasibleSampleError,
    InvalidArgumentError,
    ParseError,
    SchemaError,
)
from .rng import SplitMix64


@dataclass(frozen=True)
class CsvSchema:
    """Column roles of a dataset file.

    ``features=None`` means every column other than the label and sub-class
    columns is a feature.
    """

    label: str
    positive: str
    features: tuple[str, ...] | None = None
    subclass: str | None = None

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CsvSchema":
        allowed = {"label", "positive", "features", "subclass"}
        unknown = set(doc) - allowed - {"path"}
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        if "label" not in doc or "positive" not in doc:
            raise SchemaError("schema needs 'label' and 'positive'")
        feats = doc.get("features")
        return cls(
            label=str(doc["label"]),
            positive=str(doc["positive"]),
            features=tuple(feats) if feats is not None else None,
            subclass=doc.get("subclass"),
        )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "positive": self.positive,
            "features": list(self.features) if self.features is not None else None,
            "subclass": self.subclass,
        }


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with positive/negative labels and optional negative sub-classes.

    ``subclass`` is an object array holding a sub-class name for every
    negative row and ``None`` for positive rows, or ``None`` when the dataset
    declares no sub-classes.
    """

    features: np.ndarray
    positive: np.ndarray
    subclass: np.ndarray | None = None
    name: str = ""
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidArgumentError(f"features must be a non-empty 2-D matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("features must be finite")
        y = np.asarray(self.positive, dtype=bool)
        if y.shape != (x.shape[0],):
            raise InvalidArgumentError("one label per row required")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "positive", _frozen(y))
        if self.subclass is not None:
            sub = np.array(
                [None if pos else s for s, pos in zip(self.subclass, y)], dtype=object
            )
            if any(s is None or s == "" for s, pos in zip(sub, y) if not pos):
                raise InvalidArgumentError("every negative row needs a sub-class")
            object.__setattr__(self, "subclass", _frozen(sub))
        if not self.feature_names:
            names = tuple(f"x{j}" for j in range(x.shape[1]))
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def has_subclasses(self) -> bool:
        return self.subclass is not None

    def subclasses(self) -> list[str]:
        if self.subclass is None:
            return []
        return sorted({s for s in self.subclass if s is not None})

    def strata(self) -> np.ndarray:
        """Per-row stratum key used for stratified splitting."""
        keys = np.empty(self.n, dtype=object)
        for i in range(self.n):
            if self.positive[i]:
                keys[i] = "+"
            elif self.subclass is None:
                keys[i] = "-"
            else:
                keys[i] = "-" + str(self.subclass[i])
        return keys

    def subset(self, rows: Sequence[int], name: str | None = None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.features[rows],
            self.positive[rows],
            None if self.subclass is None else self.subclass[rows],
            name=self.name if name is None else name,
            feature_names=self.feature_names,
        )


def load_csv(path: str | Path, schema: CsvSchema) -> Dataset:
    """Read a comma-separated UTF-8 file with a header row into a Dataset."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col = {h: i for i, h in enumerate(header)}
        for needed in [schema.label] + ([schema.subclass] if schema.subclass else []):
            if needed not in col:
                raise SchemaError(f"{path}: missing column {needed!r}")
        if schema.features is None:
            skip = {schema.label, schema.subclass}
            feats = [h for h in header if h not in skip]
        else:
            feats = list(schema.features)
            missing = [f for f in feats if f not in col]
            if missing:
                raise SchemaError(f"{path}: missing feature columns {missing}")
        if not feats:
            raise SchemaError(f"{path}: no feature columns")
        fidx = [col[f] for f in feats]
        li = col[schema.label]
        si = col[schema.subclass] if schema.subclass else None

        rows: list[list[float]] = []
        labels: list[bool] = []
        subs: list[str | None] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}", lineno)
            vals = []
            for j in fidx:
                cell = rec[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {header[j]!r}", lineno
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{lineno}: non-finite value in column {header[j]!r}", lineno)
                vals.append(v)
            is_pos = rec[li].strip() == schema.positive
            sub = None
            if si is not None and not is_pos:
                sub = rec[si].strip()
                if not sub:
                    raise SchemaError(f"{path}:{lineno}: negative row without sub-class")
            rows.append(vals)
            labels.append(is_pos)
            subs.append(sub)
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    return Dataset(
        np.array(rows, dtype=float),
        np.array(labels, dtype=bool),
        np.array(subs, dtype=object) if si is not None else None,
        name=path.stem,
        feature_names=tuple(feats),
    )


def load_matrix(path: str | Path, features: Sequence[str] | None = None) -> np.ndarray:
    """Read an all-numeric CSV (header required) into a float matrix."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        names = list(features) if features is not None else header
        missing = [f for f in names if f not in header]
        if missing:
            raise SchemaError(f"{path}: missing feature columns {missing}")
        idx = [header.index(f) for f in names]
        out = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(rec[j]) for j in idx]
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: non-numeric or missing cell", lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}:{lineno}: non-finite value", lineno)
            out.append(vals)
    if not out:
        raise EmptyDatasetError(f"{path}: no data rows")
    return np.array(out, dtype=float)


def kfold_split(dataset: Dataset, k: int, seed: int) -> list[np.ndarray]:
    """Stratified k-fold partition of row indices.

    Rows of each (label, sub-class) stratum are shuffled and dealt round-robin;
    the dealing offset carries over between strata so overall fold sizes also
    differ by at most one.
    """
    if k < 2 or k > dataset.n:
        raise InvalidArgumentError(f"invalid k={k} for {dataset.n} rows")
    rng = SplitMix64(seed)
    strata = dataset.strata()
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for key in sorted(set(strata)):
        members = [i for i in range(dataset.n) if strata[i] == key]
        rng.shuffle(members)
        for j, row in enumerate(members):
            folds[(offset + j) % k].append(row)
        offset = (offset + len(members)) % k
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def positive_count(ratio: float, size: int) -> int:
    """Round-half-up of ``ratio * size``.

    Decimal arithmetic on the shortest repr of ``ratio`` keeps 0.3 * 50 at 15
    instead of flooring 15.000000000000002 + 0.5 the wrong way on other grids.
    """
    prod = Decimal(repr(float(ratio))) * size + Decimal("0.5")
    return int(prod.to_integral_value(rounding=ROUND_FLOOR))


def apportion(total: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``total`` by ``weights`` (ties to lower index)."""
    quotas = [w * total for w in weights]
    base = [int(math.floor(q)) for q in quotas]
    left = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


@dataclass(frozen=True)
class SampleSpec:
    """Request for one test sample."""

    positive_ratio: float
    max_size: int
    seed: int
    subclass_proportions: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.positive_ratio <= 1.0:
            raise InvalidArgumentError(f"positive_ratio {self.positive_ratio} outside [0, 1]")
        if self.max_size < 1:
            raise InvalidArgumentError("max_size must be positive")
        if self.subclass_proportions is not None:
            props = self.subclass_proportions
            if any(not 0.0 <= v <= 1.0 for v in props.values()):
                raise InvalidArgumentError("sub-class proportions must lie in [0, 1]")
            if abs(math.fsum(props.values()) - 1.0) > 1e-9:
                raise InvalidArgumentError("sub-class proportions must sum to 1")


@dataclass(frozen=True)
class Sample:
    """Indices of a drawn test sample plus its hidden truth."""

    indices: np.ndarray
    n_positive: int
    subclass_counts: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def true_ratio(self) -> float:
        return self.n_positive / self.size


def _counts_for(size: int, ratio: float, names: list[str], weights: list[float] | None) -> tuple[int, list[int]]:
    n_pos = positive_count(ratio, size)
    n_neg = size - n_pos
    if weights is None:
        return n_pos, [n_neg]
    return n_pos, apportion(n_neg, weights)


def draw_sample(dataset: Dataset, pool: Sequence[int], spec: SampleSpec) -> Sample:
    """Draw a test sample without replacement from ``pool`` rows of ``dataset``.

    The realized size is the largest size not above ``spec.max_size`` whose
    class (and sub-class) counts the pool can supply.
    """
    pool = np.asarray(pool, dtype=np.int64)
    is_pos = dataset.positive[pool]
    pos_rows = pool[is_pos].tolist()
    negs = pool[~is_pos]
    if spec.subclass_proportions is None:
        names: list[str] = []
        weights = None
        neg_groups = [negs.tolist()]
    else:
        if dataset.subclass is None:
            raise InvalidArgumentError("sub-class proportions given for a dataset without sub-classes")
        names = sorted(spec.subclass_proportions)
        weights = [float(spec.subclass_proportions[s]) for s in names]
        neg_sub = dataset.subclass[negs]
        neg_groups = [negs[neg_sub == s].tolist() for s in names]
    avail_neg = [len(g) for g in neg_groups]

    p = spec.positive_ratio
    upper = min(spec.max_size, len(pos_rows) + sum(avail_neg))
    # coarse upper bounds; the loop below settles the exact feasible size
    if p > 0 and len(pos_rows) / p < upper:
        upper = int(len(pos_rows) / p) + 1
    if p < 1 and sum(avail_neg) / (1 - p) < upper:
        upper = int(sum(avail_neg) / (1 - p)) + 1
    size = upper
    while size >= 1:
        n_pos, neg_counts = _counts_for(size, p, names, weights)
        if n_pos <= len(pos_rows) and all(c <= a for c, a in zip(neg_counts, avail_neg)):
            break
        size -= 1
    if size < 1:
        raise InfeasibleSampleError(f"pool cannot provide a sample at ratio {p}")

    rng = SplitMix64(spec.seed)
    chosen = rng.sample(pos_rows, n_pos)
    for group, count in zip(neg_groups, neg_counts):
        chosen.extend(rng.sample(group, count))
    sub_counts = dict(zip(names, neg_counts)) if names else {}
    return Sample(np.array(sorted(chosen), dtype=np.int64), n_pos, sub_counts)


def mae(estimates: Sequence[float], truths: Sequence[float]) -> float:
    """Mean absolute error between predicted and true positive ratios."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.ndim != 1 or est.shape != tru.shape or est.size == 0:
        raise InvalidArgumentError("estimates and truths must be equal-length, non-empty")
    return float(np.mean(np.abs(est - tru)))
