"""Synthetic data generators shared by the test modules."""
from __future__ import annotations

import numpy as np

from ocquant.core import Dataset


def separable_dataset(
    n_pos: int = 2500,
    n_neg: int = 2500,
    m: int = 2,
    sep: float = 6.0,
    seed: int = 0,
    subclasses: tuple[str, ...] = (),
) -> Dataset:
    """Unit Gaussians: positives at the origin, negatives ``sep`` sigma away on the diagonal.

    With ``subclasses``, each negative sub-class gets its own centre at
    distance ``sep`` in a different direction.
    """
    r = np.random.default_rng(seed)
    pos = r.normal(0.0, 1.0, (n_pos, m))
    if not subclasses:
        shift = np.full(m, sep / np.sqrt(m))
        neg = r.normal(0.0, 1.0, (n_neg, m)) + shift
        return Dataset(np.vstack([pos, neg]), np.r_[np.ones(n_pos, bool), np.zeros(n_neg, bool)], name="separable")
    parts, names = [], []
    for i, sc in enumerate(subclasses):
        angle = np.pi / 2 * i / max(1, len(subclasses) - 1)
        centre = np.zeros(m)
        centre[0], centre[1 % m] = sep * np.cos(angle), sep * np.sin(angle)
        count = n_neg // len(subclasses) + (1 if i < n_neg % len(subclasses) else 0)
        parts.append(r.normal(0.0, 1.0, (count, m)) + centre)
        names += [sc] * count
    neg = np.vstack(parts)
    sub = [None] * n_pos + names
    y = np.r_[np.ones(n_pos, bool), np.zeros(len(neg), bool)]
    return Dataset(np.vstack([pos, neg]), y, np.array(sub, dtype=object), name="separable")


QUADRANT_CENTRES = np.array([[3.0, 3.0], [-3.0, -3.0]])


def quadrant_positives(rng: np.random.Generator, n: int) -> np.ndarray:
    """Positives split between two clusters in opposite quadrants."""
    which = rng.integers(0, 2, n)
    return QUADRANT_CENTRES[which] + rng.normal(0.0, 1.0, (n, 2))


def quadrant_negatives(rng: np.random.Generator, n: int) -> np.ndarray:
    """Negatives drawn exactly like the positives of the first quadrant."""
    return QUADRANT_CENTRES[0] + rng.normal(0.0, 1.0, (n, 2))


def pu_pair(
    rng: np.random.Generator, n_labeled: int, n_unlabeled: int, p: float, m: int = 2, shift: float = 2.5
) -> tuple[np.ndarray, np.ndarray, float]:
    """Labeled N(0, I) positives and an unlabeled mix with ``round(p * n)`` positives."""
    k = int(round(p * n_unlabeled))
    labeled = rng.normal(0.0, 1.0, (n_labeled, m))
    unlabeled = np.vstack([rng.normal(0.0, 1.0, (k, m)), rng.normal(shift, 1.0, (n_unlabeled - k, m))])
    return labeled, unlabeled, k / n_unlabeled
