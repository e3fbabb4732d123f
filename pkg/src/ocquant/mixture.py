"""One Distribution Inside (ODIn): fit the positive score histogram inside the test one."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .rng import SplitMix64
from .scorer import MahalanobisModel, cv_scores, fit_mahalanobis


@dataclass(frozen=True, eq=False)
class ScoreHistogram:
    """Normalized histogram over ``len(thresholds) + 1`` bins.

    Bin 0 holds scores ``<= thresholds[0]``, bin i holds
    ``(thresholds[i-1], thresholds[i]]`` and the last bin holds scores above
    ``thresholds[-1]``.
    """

    thresholds: np.ndarray
    masses: np.ndarray


def percentile_edges(scores: np.ndarray, bins: int) -> np.ndarray:
    """Thresholds at percentiles 0, 100/b, ..., 100, with duplicates merged."""
    if bins < 1:
        raise InvalidArgumentError("bins must be >= 1")
    q = np.linspace(0.0, 1.0, bins + 1)
    return np.unique(np.quantile(np.asarray(scores, dtype=float), q, method="linear"))


def build_histogram(scores: Sequence[float], thresholds: Sequence[float]) -> ScoreHistogram:
    s = np.asarray(scores, dtype=float)
    t = np.asarray(thresholds, dtype=float)
    if s.size == 0:
        raise InvalidArgumentError("scores must be non-empty")
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("thresholds must be strictly increasing")
    idx = np.searchsorted(t, s, side="left")
    counts = np.bincount(idx, minlength=t.size + 1)
    return ScoreHistogram(t, counts / s.size)


def _check_pair(h_in: ScoreHistogram, h_out: ScoreHistogram) -> None:
    if h_in.masses.shape != h_out.masses.shape or not np.array_equal(h_in.thresholds, h_out.thresholds):
        raise InvalidArgumentError("histograms do not share a bin structure")


def overflow(alpha: float, h_in: ScoreHistogram, h_out: ScoreHistogram) -> float:
    """Mass of ``alpha * h_in`` that does not fit under ``h_out``."""
    _check_pair(h_in, h_out)
    if alpha < 0:
        raise InvalidArgumentError("alpha must be non-negative")
    return float(np.sum(np.maximum(0.0, alpha * h_in.masses - h_out.masses)))


def odin_scale_search(
    h_plus: ScoreHistogram,
    h_test: ScoreHistogram,
    limit: float,
    tol: float = 1e-6,
) -> tuple[float, float]:
    """Largest scale ``s`` in [0, 1] with ``overflow(s) <= s * limit``, and ``s - overflow(s)``.

    ``overflow(a) - a * limit`` is convex, piecewise linear and zero at 0, so
    the feasible scales form an interval starting at 0 and bisection applies.
    """
    _check_pair(h_plus, h_test)
    if limit < 0:
        raise InvalidArgumentError("overflow limit must be non-negative")

    def feasible(a: float) -> bool:
        return overflow(a, h_plus, h_test) <= a * limit

    if feasible(1.0):
        s = 1.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        s = lo
    p_hat = s - overflow(s, h_plus, h_test)
    return s, min(1.0, max(0.0, p_hat))


@dataclass(frozen=True, eq=False)
class OdinModel:
    scorer: MahalanobisModel
    h_plus: ScoreHistogram
    limit: float
    bins: int = 10
    d: float = 2.0
    overflow_mean: float = 0.0
    overflow_std: float = 0.0
    k: int = 10
    seed: int = 0
    splits: int = 30

    @property
    def thresholds(self) -> np.ndarray:
        return self.h_plus.thresholds


def overflow_limit(
    scores: np.ndarray, thresholds: np.ndarray, d: float, splits: int, seed: int
) -> tuple[float, float, float]:
    """Limit ``mu + d * sigma`` of the unit-scale overflow between random positive halves.

    Returns (limit, mu, sigma). Each of the ``splits`` repetitions shuffles the
    scores and compares the histograms of the two disjoint halves.
    """
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    if n < 2 or splits < 1:
        raise InvalidArgumentError("need at least 2 scores and 1 split")
    rng = SplitMix64(seed)
    half = n // 2
    vals = []
    for _ in range(splits):
        order = list(range(n))
        rng.shuffle(order)
        a = build_histogram(scores[order[:half]], thresholds)
        b = build_histogram(scores[order[half:2 * half]], thresholds)
        vals.append(overflow(1.0, a, b))
    mu = math.fsum(vals) / len(vals)
    sigma = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return mu + d * sigma, mu, sigma


def train_odin(
    positives: np.ndarray,
    bins: int = 10,
    d: float = 2.0,
    k: int = 10,
    seed: int = 0,
    splits: int = 30,
) -> OdinModel:
    x = np.asarray(positives, dtype=float)
    k_eff = min(k, x.shape[0])
    scores = cv_scores(x, k_eff, seed)
    edges = percentile_edges(scores, bins)
    h_plus = build_histogram(scores, edges)
    limit, mu, sigma = overflow_limit(scores, edges, d, splits, seed ^ 0x0D1)
    return OdinModel(fit_mahalanobis(x), h_plus, limit, bins, d, mu, sigma, k_eff, seed, splits)


def odin_quantify(model: OdinModel, test: np.ndarray) -> float:
    test = np.asarray(test, dtype=float)
    if test.ndim != 2 or test.shape[0] == 0:
        raise InvalidArgumentError("test sample must be a non-empty matrix")
    h_test = build_histogram(model.scorer.score_samples(test), model.thresholds)
    return odin_scale_search(model.h_plus, h_test, model.limit)[1]
