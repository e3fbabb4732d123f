"""Positive-unlabeled prior estimators built on region search (TIcE, ExTIcE, RanFocE) and EN.

Every estimator returns the label frequency ``c`` (the fraction of positives
that are labeled) and converts it into the positive ratio of the unlabeled
sample with :func:`c_to_p`.
"""
from __future__ import annotations

import hashlib
import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .rng import SplitMix64
from .scorer import fit_calibrated, predict_proba


@dataclass(frozen=True)
class TiceParams:
    """Search settings shared by TIcE and ExTIcE.

    ``min_labeled=None`` selects ``min(1000, floor(0.5 + 0.1 * |L|))``.
    ``iterations`` is the number of passes that refine the ``c`` used inside
    the correction term.
    """

    folds: int = 5
    max_splits: int = 500
    min_labeled: int | None = None
    confidence: float = 0.1
    iterations: int = 2

    def __post_init__(self) -> None:
        if self.folds < 1:
            raise InvalidArgumentError("folds must be >= 1")
        if self.max_splits < 0:
            raise InvalidArgumentError("max_splits must be >= 0")
        if self.min_labeled is not None and self.min_labeled < 1:
            raise InvalidArgumentError("min_labeled must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise InvalidArgumentError("confidence must be in (0, 1)")
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be >= 1")

    def labeled_floor(self, n_labeled: int) -> int:
        if self.min_labeled is not None:
            return self.min_labeled
        return default_min_labeled(n_labeled)


def default_min_labeled(n_labeled: int) -> int:
    return max(1, min(1000, int(math.floor(0.5 + 0.1 * n_labeled))))


@dataclass(frozen=True, eq=False)
class Region:
    """Axis-aligned region: ``lower < x <= upper`` on every feature."""

    rows: np.ndarray
    labeled_count: int
    unlabeled_count: int
    lower: np.ndarray
    upper: np.ndarray
    depth: int = 0

    @property
    def c_hat(self) -> float:
        return c_hat_region(self)

    def bounds(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lower, self.upper)]


@dataclass(frozen=True)
class PriorEstimate:
    """Label-frequency estimate with its positive-ratio conversion and diagnostics."""

    c_hat: float
    p_hat: float
    method: str
    n_labeled: int
    n_unlabeled: int
    fold_estimates: tuple[float, ...] = ()
    fold_best_raw: tuple[float, ...] = ()
    splits_used: tuple[int, ...] = ()
    best_bounds: tuple[tuple[float, float], ...] = ()
    elapsed_ns: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def best_raw(self) -> float:
        """Highest uncorrected region ratio seen in any fold."""
        return max(self.fold_best_raw) if self.fold_best_raw else float("nan")

    def diagnostics(self) -> dict:
        def _num(v: float):
            return v if math.isfinite(v) else (None if math.isnan(v) else ("inf" if v > 0 else "-inf"))

        return {
            "method": self.method,
            "c_hat": self.c_hat,
            "p_hat": self.p_hat,
            "n_labeled": self.n_labeled,
            "n_unlabeled": self.n_unlabeled,
            "fold_estimates": list(self.fold_estimates),
            "fold_best_raw": list(self.fold_best_raw),
            "splits_used": list(self.splits_used),
            "best_bounds": [[_num(a), _num(b)] for a, b in self.best_bounds],
            "elapsed_ns": self.elapsed_ns,
            **self.extra,
        }


def c_hat_region(region: Region) -> float:
    total = region.labeled_count + region.unlabeled_count
    if total < 1:
        raise InvalidArgumentError("empty region")
    return region.labeled_count / total


def correction_delta(c_tilde: float, n: int, conf: float = 0.1) -> float:
    """One-sided Cantelli width ``sqrt(c(1-c)(1-conf) / (conf n))`` of a ratio over ``n`` rows."""
    var = max(0.0, c_tilde * (1.0 - c_tilde))
    return math.sqrt(var * (1.0 - conf) / (conf * n))


def c_to_p(c_hat: float, n_labeled: int, n_unlabeled: int) -> float:
    """Positive ratio of the unlabeled sample implied by label frequency ``c_hat``.

    ``c_hat`` is floored at ``|L| / (|L| + |U|)``, the value that already maps
    to 1; ``c_hat <= 0`` maps to 1.
    """
    if n_labeled < 1 or n_unlabeled < 1:
        raise InvalidArgumentError("counts must be >= 1")
    if c_hat <= 0:
        return 1.0
    c = max(c_hat, n_labeled / (n_labeled + n_unlabeled))
    p = (n_labeled / c - n_labeled) / n_unlabeled
    return min(1.0, max(0.0, p))


def ensemble_min(p_pat: float, p_extice: float) -> float:
    return min(p_pat, p_extice)


def _stack(labeled: np.ndarray, unlabeled: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lab = np.asarray(labeled, dtype=float)
    unl = np.asarray(unlabeled, dtype=float)
    if lab.ndim != 2 or unl.ndim != 2 or lab.shape[0] == 0 or unl.shape[0] == 0:
        raise InvalidArgumentError("labeled and unlabeled sets must be non-empty matrices")
    if lab.shape[1] != unl.shape[1]:
        raise InvalidArgumentError("labeled and unlabeled sets differ in feature count")
    x = np.vstack([lab, unl])
    s = np.concatenate([np.ones(len(lab), dtype=bool), np.zeros(len(unl), dtype=bool)])
    return x, s


def content_folds(x: np.ndarray, s: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold id per row keyed by a seeded hash of the row content.

    Rows of each label group are ordered by hash (then by raw bytes) and dealt
    round-robin, so the assignment ignores row order and stays balanced.
    """
    key = (seed & ((1 << 64) - 1)).to_bytes(8, "little")
    ids = np.empty(len(x), dtype=np.int64)
    offset = 0
    for flag in (True, False):
        members = np.flatnonzero(s == flag)
        keyed = []
        for i in members:
            raw = x[i].tobytes()
            digest = hashlib.blake2b(raw, digest_size=8, key=key, person=b"L" if flag else b"U").digest()
            keyed.append((digest, raw, int(i)))
        keyed.sort()
        for j, (_, _, i) in enumerate(keyed):
            ids[i] = (offset + j) % k
        offset = (offset + len(keyed)) % k
    return ids


@dataclass
class _Visited:
    """Ratios, sizes and bounds of every region a search visited."""

    ratio: np.ndarray
    size: np.ndarray
    lower: list[np.ndarray]
    upper: list[np.ndarray]
    splits: int

    def best(self, c_tilde: float, conf: float) -> tuple[float, int]:
        """Highest ``ratio - delta(c_tilde, size)`` and the region index reaching it."""
        var = max(0.0, c_tilde * (1.0 - c_tilde))
        corr = self.ratio - np.sqrt(var * (1.0 - conf) / (conf * self.size))
        i = int(np.argmax(corr))
        return float(corr[i]), i


def _search(
    x: np.ndarray,
    s: np.ndarray,
    min_labeled: int,
    max_splits: int,
    exhaustive: bool,
) -> _Visited:
    """Best-first region search on one induction set.

    Regions are dequeued by highest ratio, then larger labeled count, then
    lower feature index. The visit order does not depend on the correction,
    so the caller can score the visited set under several ``c_tilde`` values.
    """
    n, m = x.shape
    counter = 0

    def make(rows: np.ndarray, lower: np.ndarray, upper: np.ndarray, depth: int) -> Region:
        nl = int(np.count_nonzero(s[rows]))
        return Region(rows, nl, len(rows) - nl, lower, upper, depth)

    root = make(np.arange(n), np.full(m, -np.inf), np.full(m, np.inf), 0)
    ratios, sizes, lowers, uppers = [root.c_hat], [n], [root.lower], [root.upper]
    heap = [(-root.c_hat, -root.labeled_count, -1, counter, root)]
    splits = 0
    while heap and splits < max_splits:
        region = heapq.heappop(heap)[-1]
        rows = region.rows
        r = len(rows)
        if r < 2:
            continue
        v = x[rows]
        h = (r - 1) // 2
        med = np.partition(v, h, axis=0)[h]
        left = v <= med
        sl = s[rows]
        n_left = left.sum(axis=0)
        l_left = (left & sl[:, None]).sum(axis=0)
        l_right = region.labeled_count - l_left
        n_right = r - n_left
        ok_l = (n_left > 0) & (n_right > 0) & (l_left >= min_labeled)
        ok_r = (n_left > 0) & (n_right > 0) & (l_right >= min_labeled)
        feats = np.flatnonzero(ok_l | ok_r)
        if feats.size == 0:
            continue
        if not exhaustive:
            c_left = np.where(ok_l, l_left / np.maximum(n_left, 1), -1.0)
            c_right = np.where(ok_r, l_right / np.maximum(n_right, 1), -1.0)
            best_c = np.maximum(c_left, c_right)
            best_l = np.where(c_left >= c_right, l_left, l_right)
            # highest child ratio, then larger labeled count, then lower feature index
            j = min(feats, key=lambda f: (-best_c[f], -best_l[f], f))
            feats = np.array([j])
        splits += 1
        for j in feats:
            mask = left[:, j]
            for side_ok, side_mask, is_left in ((ok_l[j], mask, True), (ok_r[j], ~mask, False)):
                if not side_ok:
                    continue
                lower = region.lower.copy()
                upper = region.upper.copy()
                if is_left:
                    upper[j] = min(upper[j], med[j])
                else:
                    lower[j] = max(lower[j], med[j])
                child = make(rows[side_mask], lower, upper, region.depth + 1)
                ratios.append(child.c_hat)
                sizes.append(len(child.rows))
                lowers.append(lower)
                uppers.append(upper)
                counter += 1
                heapq.heappush(heap, (-child.c_hat, -child.labeled_count, int(j), counter, child))
    return _Visited(np.array(ratios), np.array(sizes, dtype=float), lowers, uppers, splits)


def _tree_estimate(labeled, unlabeled, params: TiceParams, seed: int, exhaustive: bool) -> PriorEstimate:
    start = time.perf_counter_ns()
    x, s = _stack(labeled, unlabeled)
    n_lab, n_unl = int(s.sum()), int((~s).sum())
    l_min = params.labeled_floor(n_lab)
    k = params.folds
    if k > 1:
        ids = content_folds(x, s, k, seed)
        slices = [ids != f for f in range(k)]
    else:
        slices = [np.ones(len(x), dtype=bool)]
    visited = [_search(x[keep], s[keep], l_min, params.max_splits, exhaustive) for keep in slices]

    # delta is computed from a running estimate of c: 0.5 first, then the fold mean
    c_tilde = 0.5
    history = []
    for _ in range(params.iterations):
        picks = [v.best(c_tilde, params.confidence) for v in visited]
        ests = [min(1.0, max(0.0, corr)) for corr, _ in picks]
        c_tilde = min(1.0, max(0.0, math.fsum(ests) / len(ests)))
        history.append(c_tilde)
    f_best = max(range(len(picks)), key=lambda f: picks[f][0])
    v, i = visited[f_best], picks[f_best][1]
    bounds = tuple((float(a), float(b)) for a, b in zip(v.lower[i], v.upper[i]))
    return PriorEstimate(
        c_hat=c_tilde,
        p_hat=c_to_p(c_tilde, n_lab, n_unl),
        method="extice" if exhaustive else "tice",
        n_labeled=n_lab,
        n_unlabeled=n_unl,
        fold_estimates=tuple(ests),
        fold_best_raw=tuple(float(v.ratio.max()) for v in visited),
        splits_used=tuple(v.splits for v in visited),
        best_bounds=bounds,
        elapsed_ns=time.perf_counter_ns() - start,
        extra={"min_labeled": l_min, "folds": k, "max_splits": params.max_splits,
               "confidence": params.confidence, "c_tilde_history": history},
    )


def tice_estimate(labeled, unlabeled, params: TiceParams = TiceParams(), seed: int = 0) -> PriorEstimate:
    """TIcE: each split keeps only the feature whose better child has the highest ratio.

    For each of ``params.folds`` folds the search runs on the rows outside
    that fold; the fold estimate is the best ``c_gamma - delta_gamma`` over all
    visited regions, and ``c`` is the mean over folds. ``delta_gamma`` uses the
    region size and the current estimate of ``c`` (0.5 on the first pass).
    """
    return _tree_estimate(labeled, unlabeled, params, seed, exhaustive=False)


def extice_estimate(labeled, unlabeled, params: TiceParams = TiceParams(), seed: int = 0) -> PriorEstimate:
    """ExTIcE: like TIcE but both children of every feature's split are queued."""
    return _tree_estimate(labeled, unlabeled, params, seed, exhaustive=True)


def _random_tree_max(x: np.ndarray, s: np.ndarray, min_labeled: int, rng: SplitMix64) -> float:
    best = float(np.count_nonzero(s)) / len(s)
    stack = [np.arange(len(x))]
    while stack:
        rows = stack.pop()
        sl = s[rows]
        xl = x[rows][sl]
        n_l = xl.shape[0]
        if n_l < 2 * min_labeled:
            continue
        srt = np.sort(xl, axis=0)
        lo = srt[min_labeled - 1]
        hi = srt[n_l - min_labeled]
        eligible = np.flatnonzero(lo < hi)
        if eligible.size == 0:
            continue
        j = int(eligible[rng.below(eligible.size)])
        t = lo[j] + rng.uniform() * (hi[j] - lo[j])
        if t >= hi[j]:
            t = lo[j]
        mask = x[rows, j] <= t
        for child in (rows[mask], rows[~mask]):
            best = max(best, float(np.count_nonzero(s[child])) / len(child))
            stack.append(child)
    return best


def ranfoce_estimate(
    labeled, unlabeled, trees: int = 100, seed: int = 0, min_labeled: int | None = None
) -> PriorEstimate:
    """Random-split forest baseline: median over trees of each tree's highest node ratio.

    Each node is split on a random feature at a uniform random threshold that
    leaves at least ``min_labeled`` labeled rows on both sides. No correction
    term is subtracted.
    """
    if trees < 1:
        raise InvalidArgumentError("trees must be >= 1")
    start = time.perf_counter_ns()
    x, s = _stack(labeled, unlabeled)
    n_lab, n_unl = int(s.sum()), int((~s).sum())
    l_min = min_labeled if min_labeled is not None else default_min_labeled(n_lab)
    rng = SplitMix64(seed)
    per_tree = [_random_tree_max(x, s, l_min, rng) for _ in range(trees)]
    c = min(1.0, max(0.0, float(np.median(per_tree))))
    return PriorEstimate(
        c_hat=c,
        p_hat=c_to_p(c, n_lab, n_unl),
        method="ranfoce",
        n_labeled=n_lab,
        n_unlabeled=n_unl,
        elapsed_ns=time.perf_counter_ns() - start,
        extra={"trees": trees, "min_labeled": l_min},
    )


def en_estimate(labeled, unlabeled, l2: float = 1e-3) -> PriorEstimate:
    """Elkan-Noto: mean predicted P(labeled | x) over the labeled rows."""
    start = time.perf_counter_ns()
    x, s = _stack(labeled, unlabeled)
    model = fit_calibrated(x[s], x[~s], l2=l2)
    c = float(np.mean(predict_proba(model, x[s])))
    c = min(1.0, max(np.finfo(float).tiny, c))
    n_lab, n_unl = int(s.sum()), int((~s).sum())
    return PriorEstimate(
        c_hat=c,
        p_hat=c_to_p(c, n_lab, n_unl),
        method="en",
        n_labeled=n_lab,
        n_unlabeled=n_unl,
        elapsed_ns=time.perf_counter_ns() - start,
        extra={"l2": l2, "iterations": model.iterations},
    )
