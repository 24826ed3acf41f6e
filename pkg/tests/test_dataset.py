import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_ds, write_text
from timatch.dataset import (
    CovariateKind,
    coarsen,
    discretize_for_distance,
    equal_width_edges,
    bin_codes,
    load_csv,
    load_schema,
    scaled_covariates,
    sturges_bins,
    write_csv,
)
from timatch.errors import DegenerateDataError, SchemaError, ValidationError

SCHEMA = {"x1": "covariate_continuous", "d1": "covariate_discrete", "T": "treatment", "Y": "outcome"}
C, D = CovariateKind.CONTINUOUS, CovariateKind.DISCRETE

TINY = "x1,d1,T,Y\n0.5,a,1,3.0\n1.5,b,0,1.0\n2.5,a,1,2.0\n3.5,b,0,0.5\n"


def test_tiny_csv_loads(tmp_path):
    ds = load_csv(write_text(tmp_path / "t.csv", TINY), SCHEMA)
    assert (ds.n, ds.k) == (4, 2)
    assert ds.kinds == (C, D)
    assert ds.codebook == {"d1": ["a", "b"]}
    assert ds.covariates[:, 1].tolist() == [0, 1, 0, 1]
    assert ds.n_treated == 2 and ds.n_control == 2


def test_non_binary_treatment_names_row_3(tmp_path):
    bad = TINY.replace("2.5,a,1,2.0", "2.5,a,2,2.0")
    with pytest.raises(ValidationError) as exc:
        load_csv(write_text(tmp_path / "t.csv", bad), SCHEMA)
    assert exc.value.rows == [3]
    assert "row 3" in str(exc.value)


def test_missing_cell_rejected(tmp_path):
    bad = TINY.replace("1.5,b,0,1.0", ",b,0,1.0")
    with pytest.raises(ValidationError) as exc:
        load_csv(write_text(tmp_path / "t.csv", bad), SCHEMA)
    assert exc.value.rows == [2]


def test_missing_schema_column(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write_text(tmp_path / "t.csv", TINY), {**SCHEMA, "x9": "covariate_continuous"})


@pytest.mark.parametrize(
    "schema",
    [
        {"x1": "covariate_continuous", "Y": "outcome"},
        {"x1": "covariate_continuous", "T": "treatment", "d1": "treatment", "Y": "outcome"},
        {"T": "treatment", "Y": "outcome"},
        {"x1": "weird", "T": "treatment", "Y": "outcome"},
    ],
)
def test_bad_schema(tmp_path, schema):
    with pytest.raises(SchemaError):
        load_csv(write_text(tmp_path / "t.csv", TINY), schema)


def test_schema_file(tmp_path):
    p = write_text(tmp_path / "s.json", '{"x1": "covariate_continuous", "T": "treatment", "Y": "outcome"}')
    assert load_schema(p)["T"] == "treatment"
    with pytest.raises(SchemaError):
        load_schema(write_text(tmp_path / "bad.json", "{not json"))
    with pytest.raises(SchemaError):
        load_schema(tmp_path / "absent.json")


def test_all_treated_is_degenerate(tmp_path):
    text = "x1,d1,T,Y\n0.5,a,1,3.0\n1.5,b,1,1.0\n"
    with pytest.raises(DegenerateDataError):
        load_csv(write_text(tmp_path / "t.csv", text), SCHEMA)


def test_numeric_labels_keep_order(tmp_path):
    text = "x1,d1,T,Y\n0.5,3,1,3.0\n1.5,1,0,1.0\n2.5,2,1,2.0\n"
    ds = load_csv(write_text(tmp_path / "t.csv", text), SCHEMA)
    assert ds.codebook["d1"] == ["1", "2", "3"]
    assert ds.covariates[:, 1].tolist() == [2, 0, 1]


def test_write_csv_round_trip(tmp_path, rng):
    X = np.column_stack([rng.normal(size=30), rng.integers(0, 3, 30)])
    T = np.r_[np.ones(15), np.zeros(15)].astype(int)
    ds = make_ds(X, T, rng.normal(size=30), (C, D), ["a", "b"])
    schema = write_csv(ds, tmp_path / "o.csv")
    back = load_csv(tmp_path / "o.csv", schema)
    np.testing.assert_array_equal(back.covariates, ds.covariates)
    np.testing.assert_array_equal(back.outcome, ds.outcome)
    np.testing.assert_array_equal(back.treatment, ds.treatment)


def test_dataset_arrays_are_read_only(rng):
    ds = make_ds(rng.normal(size=(6, 1)), [1, 0, 1, 0, 1, 0], np.zeros(6), (C,))
    with pytest.raises(ValueError):
        ds.covariates[0, 0] = 1.0


def test_dataset_rejects_non_dense_discrete():
    with pytest.raises(ValidationError):
        make_ds([[0.5], [2.0], [0.0]], [1, 0, 1], [0, 0, 0], (D,))


# coarsening


def test_two_bins_split_at_midpoint():
    e = equal_width_edges(np.array([0.0, 1.0, 2.0, 3.0]), 2)
    assert bin_codes(np.array([0.0, 1.0, 2.0, 3.0]), e).tolist() == [0, 0, 1, 1]


def test_constant_column_single_code():
    ds = make_ds(np.full((8, 1), 5.0), [1, 0] * 4, np.zeros(8), (C,))
    assert coarsen(ds).codes[:, 0].tolist() == [0] * 8


def test_sturges_bins():
    assert sturges_bins(500) == 10 == math.ceil(math.log2(500) + 1)
    assert sturges_bins(4000) == 13


def test_n500_normals_get_10_bins(rng):
    ds = make_ds(rng.normal(size=(500, 1)), rng.integers(0, 2, 500), np.zeros(500), (C,))
    view = coarsen(ds)
    assert view.levels(0) == 10
    assert view.codes.max() == 9 and view.codes.min() == 0


def test_bin_override_by_name(rng):
    ds = make_ds(rng.normal(size=(50, 2)), rng.integers(0, 2, 50), np.zeros(50), (C, C), ["a", "b"])
    view = coarsen(ds, {"b": 3})
    assert view.levels(0) == sturges_bins(50)
    assert view.levels(1) == 3
    with pytest.raises(ValueError):
        coarsen(ds, {"a": 1})


def test_discrete_only_is_identity(rng):
    X = rng.integers(0, 3, size=(20, 2))
    X[:3] = [[0, 0], [1, 1], [2, 2]]
    ds = make_ds(X, [1, 0] * 10, np.zeros(20), (D, D))
    np.testing.assert_array_equal(coarsen(ds).codes, X)
    np.testing.assert_array_equal(discretize_for_distance(ds, coarsen(ds)), X)


def test_mixed_spot_row():
    # edges 0, 0.9, 1.8, 2.7, 3.6: 2.7 opens bin 3
    X = [[0.0, 0], [2.7, 1], [3.6, 0], [1.0, 1]]
    ds = make_ds(X, [1, 0, 1, 0], np.zeros(4), (C, D))
    view = coarsen(ds, {0: 4})
    assert tuple(view.codes[1]) == (3, 1)
    assert view.codes[:, 1].tolist() == [0, 1, 0, 1]


def test_scaled_covariates_unit_range(rng):
    X = np.column_stack([rng.normal(3, 5, 40), rng.integers(0, 4, 40)])
    X[:4, 1] = [0, 1, 2, 3]
    ds = make_ds(X, [1, 0] * 20, np.zeros(40), (C, D))
    S = scaled_covariates(ds)
    assert S[:, 0].min() == 0.0 and S[:, 0].max() == 1.0
    np.testing.assert_array_equal(S[:, 1], X[:, 1])
    np.testing.assert_array_equal(scaled_covariates(ds, normalize=False), ds.covariates)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=60),
    st.integers(2, 20),
)
def test_coarsen_monotone_and_deterministic(values, bins):
    x = np.array(values)
    ds = make_ds(x[:, None], np.arange(len(x)) % 2, np.zeros(len(x)), (C,))
    a = coarsen(ds, {0: bins})
    b = coarsen(ds, {0: bins})
    assert a.codes.tobytes() == b.codes.tobytes()
    idx = np.argsort(x, kind="stable")
    assert np.all(np.diff(a.codes[idx, 0]) >= 0)
    assert a.codes.min() >= 0 and a.codes.max() < max(a.levels(0), 1)


# malformed-CSV fuzzing: each injected defect must be reported on its row

_DEFECTS = {
    "bad_t": lambda r: r.__setitem__(2, "2"),
    "empty_t": lambda r: r.__setitem__(2, ""),
    "bad_x": lambda r: r.__setitem__(0, "abc"),
    "nan_x": lambda r: r.__setitem__(0, "nan"),
    "inf_y": lambda r: r.__setitem__(3, "inf"),
    "missing_d": lambda r: r.__setitem__(1, "NA"),
    "short": lambda r: r.pop(),
}


@settings(max_examples=80, deadline=None)
@given(
    st.integers(4, 25),
    st.lists(st.tuples(st.integers(0, 24), st.sampled_from(sorted(_DEFECTS))), max_size=5),
    st.integers(0, 2**32 - 1),
)
def test_fuzz_malformed_rows(tmp_path_factory, n, defects, seed):
    r = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        rows.append([repr(float(r.normal())), "abc"[int(r.integers(0, 3))], str(i % 2), repr(float(r.normal()))])
    bad = set()
    for i, name in dict(defects).items():
        if i < n:
            _DEFECTS[name](rows[i])
            bad.add(i + 1)
    path = tmp_path_factory.mktemp("fuzz") / "f.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "d1", "T", "Y"])
        w.writerows(rows)
    if bad:
        with pytest.raises(ValidationError) as exc:
            load_csv(path, SCHEMA)
        assert set(exc.value.rows) == bad
    else:
        ds = load_csv(path, SCHEMA)
        assert ds.n == n
        assert np.isfinite(ds.covariates).all()
        assert set(np.unique(ds.treatment)) <= {0, 1}
