import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocquant.errors import InvalidArgumentError
from ocquant.region import (
    Region,
    TiceParams,
    c_hat_region,
    c_to_p,
    correction_delta,
    default_min_labeled,
    en_estimate,
    ensemble_min,
    extice_estimate,
    ranfoce_estimate,
    tice_estimate,
)
from ocquant.threshold import pat_quantify, train_pat
from synth import pu_pair, quadrant_negatives, quadrant_positives


def region(labeled, unlabeled):
    rows = np.arange(labeled + unlabeled)
    return Region(rows, labeled, unlabeled, np.full(1, -np.inf), np.full(1, np.inf))


# ---- small formulas -----------------------------------------------------------

def test_c_hat_region_examples():
    assert c_hat_region(region(30, 70)) == 0.3
    assert c_hat_region(region(12, 0)) == 1.0
    assert c_hat_region(region(0, 12)) == 0.0
    with pytest.raises(InvalidArgumentError):
        c_hat_region(region(0, 0))


def test_delta_examples():
    assert correction_delta(0.0, 50) == 0.0
    assert correction_delta(1.0, 50) == 0.0
    assert correction_delta(0.5, 100, 0.1) == pytest.approx(0.15)
    assert correction_delta(0.3, 40) / correction_delta(0.3, 400) == pytest.approx(math.sqrt(10))


@given(st.floats(0.001, 0.999), st.integers(1, 10_000))
def test_delta_strictly_decreasing_in_n(c, n):
    assert correction_delta(c, n + 1) < correction_delta(c, n)


def test_min_labeled_rule():
    assert default_min_labeled(50) == 5
    assert default_min_labeled(45) == 5  # floor(0.5 + 4.5)
    assert default_min_labeled(44) == 4
    assert default_min_labeled(20_000) == 1000
    assert default_min_labeled(1) == 1


def test_c_to_p_examples():
    assert c_to_p(0.5, 100, 300) == pytest.approx(1 / 3)
    assert c_to_p(1.0, 100, 300) == 0.0
    assert c_to_p(0.1, 100, 300) == 1.0
    assert c_to_p(0.0, 100, 300) == 1.0


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 1000), st.integers(1, 1000))
def test_c_to_p_nonincreasing(a, b, n_l, n_u):
    lo, hi = sorted((a, b))
    p_lo, p_hi = c_to_p(lo, n_l, n_u), c_to_p(hi, n_l, n_u)
    assert 0.0 <= p_hi <= p_lo <= 1.0


def test_ensemble_min_examples():
    assert ensemble_min(0.3, 0.5) == 0.3
    assert ensemble_min(1.0, 0.99) == 0.99
    assert ensemble_min(0.4, 0.4) == 0.4


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        TiceParams(confidence=1.0)
    with pytest.raises(InvalidArgumentError):
        TiceParams(min_labeled=0)
    with pytest.raises(InvalidArgumentError):
        TiceParams(iterations=0)


# ---- brute-force oracle for the region search --------------------------------

def all_median_regions(x, s, min_labeled):
    """(ratio, size) of every region reachable by eligible median splits on any feature."""
    out = []

    def visit(rows):
        out.append((s[rows].mean(), len(rows)))
        if len(rows) < 2:
            return
        for j in range(x.shape[1]):
            v = np.sort(x[rows, j])
            med = v[(len(rows) - 1) // 2]
            left, right = rows[x[rows, j] <= med], rows[x[rows, j] > med]
            if len(left) == 0 or len(right) == 0:
                continue
            for child in (left, right):
                if s[child].sum() >= min_labeled:
                    visit(child)

    visit(np.arange(len(x)))
    return out


def brute_force_c(x, s, min_labeled, c_tilde=0.5, conf=0.1):
    regs = all_median_regions(x, s, min_labeled)
    best = max(c - correction_delta(c_tilde, n, conf) for c, n in regs)
    return min(1.0, max(0.0, best)), max(c for c, _ in regs)


SINGLE_PASS = TiceParams(folds=1, iterations=1)


@pytest.mark.parametrize("seed", range(6))
def test_extice_matches_brute_force(seed):
    r = np.random.default_rng(seed)
    lab, unl, _ = pu_pair(r, 24, 36, 0.5)
    x = np.vstack([lab, unl])
    s = np.r_[np.ones(len(lab)), np.zeros(len(unl))]
    oracle_c, oracle_raw = brute_force_c(x, s, default_min_labeled(len(lab)))
    est = extice_estimate(lab, unl, SINGLE_PASS)
    assert est.splits_used[0] < SINGLE_PASS.max_splits
    assert est.c_hat == pytest.approx(oracle_c, abs=1e-12)
    assert est.best_raw == pytest.approx(oracle_raw, abs=1e-12)
    tice = tice_estimate(lab, unl, SINGLE_PASS)
    assert tice.best_raw <= est.best_raw
    assert tice.c_hat <= est.c_hat + 1e-12


def test_identical_distributions_root_level():
    r = np.random.default_rng(0)
    lab, unl = r.normal(size=(50, 2)), r.normal(size=(50, 2))
    x, s = np.vstack([lab, unl]), np.r_[np.ones(50), np.zeros(50)]
    oracle_c, _ = brute_force_c(x, s, default_min_labeled(50))
    root = 0.5 - correction_delta(0.5, 100)
    est = extice_estimate(lab, unl, SINGLE_PASS)
    assert est.c_hat == pytest.approx(oracle_c, abs=1e-12)
    assert abs(est.c_hat - root) <= 0.1
    assert abs(tice_estimate(lab, unl, SINGLE_PASS).c_hat - root) <= 0.1


def test_root_only_when_search_disabled():
    r = np.random.default_rng(1)
    lab, unl = r.normal(size=(50, 2)), r.normal(size=(50, 2)) + 1
    params = TiceParams(max_splits=0)
    est = tice_estimate(lab, unl, params)
    # five folds of 10 labeled + 10 unlabeled; each induction slice keeps 40 + 40
    c = 0.5
    for _ in range(params.iterations):
        c = 0.5 - correction_delta(c, 80)
    assert est.c_hat == pytest.approx(c, abs=1e-12)
    assert est.splits_used == (0,) * 5
    assert extice_estimate(lab, unl, params).c_hat == est.c_hat


def test_separable_pure_region():
    r = np.random.default_rng(2)
    lab, unl = r.normal(size=(50, 2)), r.normal(size=(100, 2)) + 10
    est = tice_estimate(lab, unl, TiceParams(iterations=1))
    assert est.best_raw == 1.0
    assert est.c_hat >= 1 - correction_delta(0.5, default_min_labeled(50))
    big = tice_estimate(r.normal(size=(500, 2)), r.normal(size=(2000, 2)) + 10)
    assert big.c_hat >= 0.9 and big.p_hat <= 0.03


def test_single_feature_tice_equals_extice():
    r = np.random.default_rng(3)
    lab, unl, _ = pu_pair(r, 80, 120, 0.4, m=1)
    a, b = tice_estimate(lab, unl, seed=5), extice_estimate(lab, unl, seed=5)
    assert a.c_hat == b.c_hat
    assert a.fold_estimates == b.fold_estimates


@pytest.mark.parametrize("estimator", [tice_estimate, extice_estimate])
def test_row_order_invariance(estimator):
    r = np.random.default_rng(4)
    lab, unl, _ = pu_pair(r, 60, 90, 0.5)
    base = estimator(lab, unl, seed=2)
    perm = estimator(lab[r.permutation(60)], unl[r.permutation(90)], seed=2)
    assert perm.c_hat == base.c_hat
    assert perm.fold_estimates == base.fold_estimates


@pytest.mark.parametrize("p", [0.2, 0.5])
def test_quadrant_overlap_extice_vs_pat(p):
    r = np.random.default_rng(5)
    lab = quadrant_positives(r, 2000)
    k = int(p * 2000)
    unl = np.vstack([quadrant_positives(r, k), quadrant_negatives(r, 2000 - k)])
    est = extice_estimate(lab, unl)
    assert abs(est.c_hat - 2000 / (2000 + k)) <= 0.1
    assert pat_quantify(train_pat(lab), unl) > p + 0.2


def test_tice_requires_data():
    with pytest.raises(InvalidArgumentError):
        tice_estimate(np.empty((0, 2)), np.ones((3, 2)))
    with pytest.raises(InvalidArgumentError):
        extice_estimate(np.ones((3, 2)), np.ones((3, 3)))


def test_diagnostics_are_json_ready():
    import json

    r = np.random.default_rng(6)
    lab, unl, _ = pu_pair(r, 40, 60, 0.5)
    d = extice_estimate(lab, unl).diagnostics()
    json.dumps(d)
    assert d["method"] == "extice" and len(d["fold_estimates"]) == 5


# ---- RanFocE ------------------------------------------------------------------

def test_ranfoce_identical_distributions():
    r = np.random.default_rng(7)
    lab, unl = r.normal(size=(1000, 2)), r.normal(size=(1000, 2))
    assert abs(ranfoce_estimate(lab, unl, seed=1).c_hat - 0.5) <= 0.05


def test_ranfoce_single_duplicate_unlabeled():
    lab = np.random.default_rng(8).normal(size=(60, 2))
    assert ranfoce_estimate(lab, lab[:1], seed=0).c_hat == 1.0


def test_ranfoce_deterministic():
    r = np.random.default_rng(9)
    lab, unl, _ = pu_pair(r, 80, 120, 0.3)
    a = ranfoce_estimate(lab, unl, trees=20, seed=4)
    assert a.c_hat == ranfoce_estimate(lab, unl, trees=20, seed=4).c_hat
    with pytest.raises(InvalidArgumentError):
        ranfoce_estimate(lab, unl, trees=0)


# ---- Elkan-Noto -----------------------------------------------------------------

def test_en_symmetric_case():
    r = np.random.default_rng(10)
    assert abs(en_estimate(r.normal(size=(500, 2)), r.normal(size=(500, 2))).c_hat - 0.5) <= 0.05


def test_en_separated_negatives():
    r = np.random.default_rng(11)
    assert en_estimate(r.normal(size=(300, 2)), r.normal(size=(300, 2)) + 12).c_hat > 0.95


def test_en_underestimates_under_overlap():
    r = np.random.default_rng(12)
    lab = r.normal(size=(500, 2))
    unl = np.vstack([r.normal(size=(500, 2)), r.normal(size=(500, 2)) + 0.5])
    truth_c = 500 / 1000
    assert en_estimate(lab, unl).c_hat < truth_c


# ---- output range ----------------------------------------------------------------

@given(st.integers(0, 10_000), st.integers(8, 40), st.integers(1, 40), st.floats(0, 1))
@settings(max_examples=25, deadline=None)
def test_estimates_in_unit_interval(seed, n_l, n_u, p):
    r = np.random.default_rng(seed)
    lab, unl, _ = pu_pair(r, n_l, n_u, p)
    for est in (
        tice_estimate(lab, unl, TiceParams(folds=2), seed),
        extice_estimate(lab, unl, TiceParams(folds=2), seed),
        ranfoce_estimate(lab, unl, trees=5, seed=seed),
        en_estimate(lab, unl),
    ):
        assert 0.0 <= est.c_hat <= 1.0
        assert 0.0 <= est.p_hat <= 1.0
