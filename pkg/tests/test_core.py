import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocquant.core import (
    CsvSchema,
    Dataset,
    SampleSpec,
    apportion,
    draw_sample,
    kfold_split,
    load_csv,
    load_matrix,
    mae,
    positive_count,
)
from ocquant.errors import (
    EmptyDatasetError,
    InfeasibleSampleError,
    InvalidArgumentError,
    ParseError,
    SchemaError,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# ---- load_csv ---------------------------------------------------------------

def test_load_three_rows(tmp_path):
    p = write(tmp_path, "f1,f2,cls\n1,2,A\n3,4,A\n5,6,B\n")
    ds = load_csv(p, CsvSchema("cls", "A"))
    assert (ds.n, ds.m) == (3, 2)
    assert int(ds.positive.sum()) == 2
    assert ds.feature_names == ("f1", "f2")
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])


def test_undeclared_columns_ignored(tmp_path):
    p = write(tmp_path, "id,f1,f2,cls\nx,1,2,A\ny,3,4,B\n")
    ds = load_csv(p, CsvSchema("cls", "A", features=("f1", "f2")))
    assert ds.m == 2


def test_header_only_is_empty(tmp_path):
    p = write(tmp_path, "f1,f2,cls\n")
    with pytest.raises(EmptyDatasetError):
        load_csv(p, CsvSchema("cls", "A"))


def test_negative_without_subclass_is_schema_error(tmp_path):
    p = write(tmp_path, "f1,cls,sub\n1,A,\n2,B,s1\n3,B,\n")
    with pytest.raises(SchemaError):
        load_csv(p, CsvSchema("cls", "A", subclass="sub"))


def test_missing_column(tmp_path):
    p = write(tmp_path, "f1,cls\n1,A\n")
    with pytest.raises(SchemaError):
        load_csv(p, CsvSchema("label", "A"))
    with pytest.raises(SchemaError):
        load_csv(p, CsvSchema("cls", "A", features=("f9",)))


def test_non_numeric_cell_reports_line(tmp_path):
    p = write(tmp_path, "f1,cls\n1,A\nabc,B\n")
    with pytest.raises(ParseError) as info:
        load_csv(p, CsvSchema("cls", "A"))
    assert info.value.row == 3
    assert ":3:" in str(info.value)


def test_subclasses_read(tmp_path):
    p = write(tmp_path, "f1,cls,sub\n1,A,\n2,B,s1\n3,B,s2\n4,B,s1\n")
    ds = load_csv(p, CsvSchema("cls", "A", subclass="sub"))
    assert ds.subclasses() == ["s1", "s2"]
    assert ds.subclass[0] is None


def test_load_matrix(tmp_path):
    p = write(tmp_path, "a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(load_matrix(p), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(load_matrix(p, ["b"]), [[2], [4]])
    with pytest.raises(EmptyDatasetError):
        load_matrix(write(tmp_path, "a,b\n", "e.csv"))


def test_dataset_is_immutable():
    ds = Dataset(np.zeros((2, 1)), [True, False])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_dataset_rejects_non_finite():
    with pytest.raises(InvalidArgumentError):
        Dataset(np.array([[np.nan]]), [True])


# ---- kfold_split ------------------------------------------------------------

def balanced(n_pos, n_neg, sub=None):
    x = np.arange(n_pos + n_neg, dtype=float)[:, None]
    y = np.r_[np.ones(n_pos, bool), np.zeros(n_neg, bool)]
    s = None if sub is None else np.array([None] * n_pos + list(sub), dtype=object)
    return Dataset(x, y, s)


def test_kfold_ten_rows_five_folds():
    folds = kfold_split(balanced(5, 5), 5, seed=1)
    assert [len(f) for f in folds] == [2] * 5
    assert sorted(np.concatenate(folds).tolist()) == list(range(10))


def test_kfold_deterministic():
    ds = balanced(30, 20)
    a, b = kfold_split(ds, 5, 9), kfold_split(ds, 5, 9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert any(not np.array_equal(x, y) for x, y in zip(a, kfold_split(ds, 5, 10)))


def test_kfold_stratified_half_half():
    ds = balanced(50, 50)
    for f in kfold_split(ds, 5, 3):
        n_pos = int(ds.positive[f].sum())
        assert abs(n_pos - (len(f) - n_pos)) <= 1


def test_kfold_invalid_k():
    with pytest.raises(InvalidArgumentError):
        kfold_split(balanced(2, 1), 4, 0)
    with pytest.raises(InvalidArgumentError):
        kfold_split(balanced(2, 1), 1, 0)


@given(st.integers(1, 30), st.integers(0, 30), st.integers(2, 6), st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_kfold_partition_and_strata_balance(n_pos, n_neg, k, seed):
    if n_pos + n_neg < k:
        return
    subs = ["a" if i % 3 else "b" for i in range(n_neg)]
    ds = balanced(n_pos, n_neg, subs)
    folds = kfold_split(ds, k, seed)
    allrows = np.concatenate(folds)
    assert len(allrows) == len(set(allrows.tolist())) == ds.n
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    for key in set(ds.strata()):
        per = [sum(1 for i in f if ds.strata()[i] == key) for f in folds]
        assert max(per) - min(per) <= 1


# ---- sampling ---------------------------------------------------------------

def test_positive_count_half_up():
    assert positive_count(0.3, 50) == 15
    assert positive_count(0.5, 3) == 2
    assert positive_count(0.25, 2) == 1
    assert positive_count(0.0, 7) == 0 and positive_count(1.0, 7) == 7


def test_apportion_largest_remainder():
    assert apportion(20, [0.8, 0.2]) == [16, 4]
    assert apportion(10, [1 / 3, 1 / 3, 1 / 3]) == [4, 3, 3]
    assert sum(apportion(7, [0.5, 0.25, 0.25])) == 7


def test_draw_thirty_percent():
    ds = balanced(100, 100)
    s = draw_sample(ds, np.arange(200), SampleSpec(0.3, 50, seed=1))
    assert s.size == 50 and s.n_positive == 15
    assert int(ds.positive[s.indices].sum()) == 15


def test_draw_all_positives():
    ds = balanced(600, 1000)
    s = draw_sample(ds, np.arange(1600), SampleSpec(1.0, 2000, seed=2))
    assert s.size == 600 and s.n_positive == 600


def test_draw_subclass_mix():
    subs = ["s1"] * 50 + ["s2"] * 50
    ds = balanced(50, 100, subs)
    s = draw_sample(ds, np.arange(150), SampleSpec(0.5, 40, 3, {"s1": 0.8, "s2": 0.2}))
    assert s.n_positive == 20
    assert s.subclass_counts == {"s1": 16, "s2": 4}
    got = Counter(ds.subclass[i] for i in s.indices if not ds.positive[i])
    assert got == {"s1": 16, "s2": 4}


def test_draw_infeasible():
    ds = balanced(5, 5)
    pool = np.flatnonzero(~ds.positive)
    with pytest.raises(InfeasibleSampleError):
        draw_sample(ds, pool, SampleSpec(0.5, 10, 0))


def test_draw_deterministic_and_seed_sensitive():
    ds = balanced(200, 200)
    a = draw_sample(ds, np.arange(400), SampleSpec(0.4, 100, 5))
    b = draw_sample(ds, np.arange(400), SampleSpec(0.4, 100, 5))
    c = draw_sample(ds, np.arange(400), SampleSpec(0.4, 100, 6))
    assert a.indices.tobytes() == b.indices.tobytes()
    assert not np.array_equal(a.indices, c.indices)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        SampleSpec(1.2, 10, 0)
    with pytest.raises(InvalidArgumentError):
        SampleSpec(0.5, 0, 0)
    with pytest.raises(InvalidArgumentError):
        SampleSpec(0.5, 10, 0, {"a": 0.5, "b": 0.4})


@given(
    st.integers(1, 60), st.integers(1, 60), st.floats(0, 1), st.integers(1, 80), st.integers(0, 2**32)
)
@settings(max_examples=80, deadline=None)
def test_draw_invariants(n_pos, n_neg, p, max_size, seed):
    ds = balanced(n_pos, n_neg)
    try:
        s = draw_sample(ds, np.arange(ds.n), SampleSpec(p, max_size, seed))
    except InfeasibleSampleError:
        return
    assert len(set(s.indices.tolist())) == s.size <= max_size
    assert s.n_positive == positive_count(p, s.size)
    assert int(ds.positive[s.indices].sum()) == s.n_positive
    assert abs(s.true_ratio - p) <= 1.0 / s.size + 1e-12


# ---- mae --------------------------------------------------------------------

GRID = [round(0.1 * i, 1) for i in range(11)]


def test_mae_identity():
    assert mae(GRID, GRID) == 0.0


def test_mae_constant_on_grid():
    # oracle: sum of |0.5 - p| over the 11-point grid is 3.0
    expected = math.fsum(abs(0.5 - p) for p in GRID) / 11
    assert math.isclose(expected, 3.0 / 11, rel_tol=1e-12)
    assert math.isclose(mae([0.5] * 11, GRID), 3.0 / 11, rel_tol=1e-12)


def test_mae_constant_uniform_law():
    p = np.random.default_rng(0).uniform(0, 1, 100_000)
    assert abs(mae(np.full_like(p, 0.5), p) - 0.25) <= 0.005


def test_mae_errors():
    with pytest.raises(InvalidArgumentError):
        mae([], [])
    with pytest.raises(InvalidArgumentError):
        mae([0.1], [0.1, 0.2])
