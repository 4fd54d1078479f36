import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from anomtypes.data import (
    Dataset,
    Schema,
    dump_dataset,
    dump_schema,
    load_dataset,
    load_schema,
    marginal_stats,
    standardize,
)
from anomtypes.errors import DataError, ParameterError

XC = Schema.of(("x", "continuous"), ("color", "categorical"))
X = Schema.of(("x", "continuous"))


def _col(values):
    return Dataset(X, {"x": values})


def test_load_minimal():
    ds = load_dataset(io.StringIO("x,color\n1.0,red\n2.0,blue\n"), XC)
    assert len(ds) == 2
    assert ds["x"].tolist() == [1.0, 2.0]
    assert ds["color"].tolist() == ["red", "blue"]
    assert ds.case_ids.tolist() == [0, 1]


def test_load_bad_token_names_row_and_column():
    with pytest.raises(DataError, match=r"row 1, column 'x'"):
        load_dataset(io.StringIO("x,color\nabc,red\n"), XC)


def test_load_empty_body():
    assert len(load_dataset(io.StringIO("x,color\n"), XC)) == 0


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "missing header"),
        ("x,colour\n1,red\n", "header mismatch"),
        ("x,color\n1,red,extra\n", "ragged"),
        ("x,color\n1,\n", "missing value"),
        ("x,color\ninf,red\n", "non-finite"),
    ],
)
def test_load_errors(text, match):
    with pytest.raises(DataError, match=match):
        load_dataset(io.StringIO(text), XC)


def test_schema_validation():
    with pytest.raises(DataError):
        Schema.of(("x", "continuous"), ("x", "categorical"))
    with pytest.raises(DataError):
        Schema.of(("x", "continuous"), dependency="t")
    s = Schema.of(("t", "continuous"), ("x", "continuous"), dependency="t")
    assert s.continuous(substantive=True) == ["x"]
    buf = io.StringIO()
    dump_schema(s, buf)
    buf.seek(0)
    assert load_schema(buf) == s


def test_dataset_rejects_bad_columns():
    with pytest.raises(DataError):
        Dataset(XC, {"x": [1.0, 2.0], "color": ["a"]})
    with pytest.raises(DataError):
        Dataset(XC, {"x": [1.0], "color": [3]})
    with pytest.raises(DataError):
        Dataset(X, {"x": [1.0, 2.0]}, case_ids=[4, 4])


def test_marginal_stats_mad_example():
    s = marginal_stats(_col([1, 2, 3, 4, 100])).continuous["x"]
    assert s.median == 3
    assert s.raw_mad == 1
    assert s.mad == pytest.approx(1.4826)
    assert s.min == 1 and s.max == 100


def test_marginal_stats_constant_column():
    s = marginal_stats(_col([5, 5, 5])).continuous["x"]
    assert (s.mean, s.sd, s.mad) == (5, 0, 0)


def test_marginal_stats_label_frequency():
    ds = Dataset(XC, {"x": np.zeros(8), "color": ["red"] * 7 + ["blue"]})
    assert marginal_stats(ds).categorical["color"]["blue"] == (1, 0.125)


def test_standardize_examples():
    assert standardize(_col([0, 10]), "zscore")["x"].tolist() == [-1.0, 1.0]
    assert standardize(_col([3, 3, 3]), "robust")["x"].tolist() == [0.0, 0.0, 0.0]
    z = standardize(_col([1, 2, 3, 4, 100]), "robust")["x"]
    assert z[-1] == pytest.approx(97 / 1.4826)
    assert z[-1] == pytest.approx(65.43, abs=0.01)


def test_standardize_errors():
    with pytest.raises(ParameterError):
        standardize(_col([1, 2]), "minmax")
    only_cat = Dataset(Schema.of(("c", "categorical")), {"c": ["a"]})
    with pytest.raises(ParameterError):
        standardize(only_cat)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_stats_match_oracle(values):
    s = marginal_stats(_col(values)).continuous["x"]
    assert s.median == pytest.approx(oracles.median(values), rel=1e-12, abs=1e-9)
    assert s.mad == pytest.approx(oracles.mad(values), rel=1e-9, abs=1e-6)
    assert s.sd == pytest.approx(oracles.pop_sd(values), rel=1e-9, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            st.text("abcxyz ,\"'", min_size=1, max_size=5).filter(lambda s: s.strip() == s and s),
        ),
        max_size=20,
    )
)
def test_csv_round_trip(rows):
    ds = Dataset.from_rows(XC, rows)
    buf = io.StringIO()
    dump_dataset(ds, buf)
    buf.seek(0)
    back = load_dataset(buf, XC)
    assert back.equals(ds)
