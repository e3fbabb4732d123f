"""Score-threshold quantifiers: CC, ACC, PAT with median sweep, and the BFT oracle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateRatesError, InvalidArgumentError
from .scorer import MahalanobisModel, cv_scores, fit_mahalanobis

DEFAULT_GRID = tuple(round(0.25 + 0.01 * i, 2) for i in range(51))


@dataclass(frozen=True)
class RateEstimates:
    tpr_hat: float
    fpr_hat: float


def classify_count(scores: Sequence[float], threshold: float) -> float:
    """Fraction of scores strictly above ``threshold``."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise InvalidArgumentError("scores must be non-empty")
    return float(np.count_nonzero(s > threshold)) / s.size


def adjusted_cc(p_hat: float, rates: RateEstimates) -> float:
    """ACC correction of a CC estimate, clamped to [0, 1]."""
    tpr, fpr = rates.tpr_hat, rates.fpr_hat
    if not tpr > fpr:
        raise DegenerateRatesError(f"TPR ({tpr}) must exceed FPR ({fpr})")
    return min(1.0, max(0.0, (p_hat - fpr) / (tpr - fpr)))


def pat_adjust(p_hat: float, q: float) -> float:
    """ACC with TPR = 1 - q and FPR = 0."""
    if not 0.0 <= q < 1.0:
        raise InvalidArgumentError(f"quantile q={q} must be in [0, 1)")
    return min(1.0, p_hat / (1.0 - q))


def counts_above(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of scores strictly above each threshold, for pre-sorted scores."""
    return len(sorted_scores) - np.searchsorted(sorted_scores, thresholds, side="right")


@dataclass(frozen=True, eq=False)
class PatModel:
    """Reusable PAT quantifier.

    ``positive_scores`` keeps the sorted out-of-fold training scores so the
    CC baselines can place their own thresholds on the same distribution.
    """

    scorer: MahalanobisModel
    grid: np.ndarray
    thresholds: np.ndarray
    positive_scores: np.ndarray
    k: int = 10
    seed: int = 0

    def estimates(self, test: np.ndarray) -> np.ndarray:
        """PAT estimate for every quantile of the grid."""
        test = np.asarray(test, dtype=float)
        if test.ndim != 2 or test.shape[0] == 0:
            raise InvalidArgumentError("test sample must be a non-empty matrix")
        s = np.sort(self.scorer.score_samples(test))
        cc = counts_above(s, self.thresholds) / len(s)
        return np.minimum(1.0, cc / (1.0 - self.grid))


def train_pat(
    positives: np.ndarray,
    grid: Sequence[float] = DEFAULT_GRID,
    k: int = 10,
    seed: int = 0,
) -> PatModel:
    """Fit the scorer and set one threshold per quantile of the out-of-fold scores."""
    x = np.asarray(positives, dtype=float)
    g = np.asarray(grid, dtype=float)
    if g.size == 0 or np.any((g < 0) | (g >= 1)):
        raise InvalidArgumentError("quantile grid values must lie in [0, 1)")
    k_eff = min(k, x.shape[0])
    scores = np.sort(cv_scores(x, k_eff, seed))
    thresholds = np.quantile(scores, g, method="linear")
    return PatModel(fit_mahalanobis(x), g, thresholds, scores, k_eff, seed)


def pat_quantify(model: PatModel, test: np.ndarray) -> float:
    """Median of the PAT estimates over the quantile grid."""
    return float(np.median(model.estimates(test)))


def percentile_thresholds(model: PatModel, step: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Integer percentiles 0..100 and the matching thresholds on the training scores."""
    pct = np.arange(0, 101, step)
    return pct, np.quantile(model.positive_scores, pct / 100.0, method="linear")


def bft_oracle(results: Mapping[int, float] | Sequence[float]) -> tuple[int, float]:
    """Pick the percentile threshold with the lowest dataset-level MAE.

    Args:
        results: MAE per percentile, either a mapping percentile -> MAE or a
            sequence indexed by percentile.

    Returns:
        (percentile, MAE); ties go to the lowest percentile. The choice uses
        test truth, so it is an oracle and not a deployable quantifier.
    """
    items = sorted(results.items()) if isinstance(results, Mapping) else list(enumerate(results))
    if not items:
        raise InvalidArgumentError("empty MAE table")
    best = min(items, key=lambda kv: (kv[1], kv[0]))
    return int(best[0]), float(best[1])
