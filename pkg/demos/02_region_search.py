"""Positive-unlabeled prior estimation where the negatives overlap half of the positives.

Positives live in two clusters; negatives are drawn exactly like one of them.
A threshold on positive-likeness cannot tell the overlapping cluster apart and
overestimates, while the region searches find the clean cluster.
"""
import numpy as np

from ocquant import ensemble_min, extice_estimate, pat_quantify, ranfoce_estimate, tice_estimate, train_pat

CENTRES = np.array([[3.0, 3.0], [-3.0, -3.0]])
rng = np.random.default_rng(0)


def positives(n):
    return CENTRES[rng.integers(0, 2, n)] + rng.normal(size=(n, 2))


def negatives(n):
    return CENTRES[0] + rng.normal(size=(n, 2))


labeled = positives(500)
pat = train_pat(labeled, seed=0)

print(" true    PAT  TIcE  ExTIcE  RanFocE  min(PAT,ExTIcE)")
for p in (0.1, 0.3, 0.5, 0.7, 0.9):
    k = int(p * 600)
    unlabeled = np.vstack([positives(k), negatives(600 - k)])
    a = pat_quantify(pat, unlabeled)
    t = tice_estimate(labeled, unlabeled, seed=1)
    e = extice_estimate(labeled, unlabeled, seed=1)
    r = ranfoce_estimate(labeled, unlabeled, seed=1)
    print(f"{p:5.2f}  {a:5.3f}  {t.p_hat:5.3f}  {e.p_hat:6.3f}  {r.p_hat:7.3f}  {ensemble_min(a, e.p_hat):6.3f}")

print("\nbest ExTIcE region of the last sample:", e.best_bounds)
