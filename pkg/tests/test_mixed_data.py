import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from covsurf.mixed_data import (CATEGORICAL, NUMERIC, DataError, LabelVector, MixedDataFrame, Schema,
                                correlation_ratio, load_csv, load_labels, squared_correlation,
                                write_csv, write_labels, write_schema)


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_numeric_inference(tmp_path):
    df = load_csv(_write(tmp_path, "a,b\n1,2\n3,4.5\n-1,1e3\n"))
    assert df.schema.kinds == (NUMERIC, NUMERIC)
    assert df.n == 3
    np.testing.assert_array_equal(df.values, [[1, 2], [3, 4.5], [-1, 1000]])


def test_categorical_levels_by_first_appearance(tmp_path):
    df = load_csv(_write(tmp_path, "g\na\nb\na\n"))
    assert df.schema.kinds == (CATEGORICAL,)
    assert df.schema.levels == (("a", "b"),)
    np.testing.assert_array_equal(df.codes(0), [0, 1, 0])


def test_sidecar_overrides_inference(tmp_path):
    path = _write(tmp_path, "x,g\n1.5,3\n2.5,7\n0.5,3\n")
    schema = Schema(("x", "g"), (NUMERIC, CATEGORICAL), ((), ("3", "7")))
    spath = tmp_path / "schema.json"
    write_schema(schema, spath)
    df = load_csv(path, spath)
    expected = MixedDataFrame(schema, np.array([[1.5, 0], [2.5, 1], [0.5, 0]]))
    assert df.schema == expected.schema
    np.testing.assert_array_equal(df.values, expected.values)


def test_unknown_level_in_schema_column(tmp_path):
    path = _write(tmp_path, "g\na\nc\n")
    schema = Schema(("g",), (CATEGORICAL,), (("a", "b"),))
    with pytest.raises(DataError, match="unknown level"):
        load_csv(path, schema)


@pytest.mark.parametrize("text,msg", [
    ("", "empty"),
    ("a,b\n1,2\n3\n", "ragged"),
])
def test_malformed_files(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(_write(tmp_path, text))


def test_single_level_column_rejected(tmp_path):
    with pytest.raises(DataError, match="at least 2 levels"):
        load_csv(_write(tmp_path, "g\na\na\n"))


def test_missing_cell_rejected(tmp_path):
    # an empty cell makes the column categorical with level "" -- but NaN in numeric is refused
    with pytest.raises(DataError):
        MixedDataFrame(Schema(("x",), (NUMERIC,), ((),)), np.array([[1.0], [np.nan]]))


def test_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    schema = Schema(("x", "g", "z"), (NUMERIC, CATEGORICAL, NUMERIC), ((), ("lo", "hi", "mid"), ()))
    vals = np.column_stack([rng.normal(size=20), rng.integers(0, 3, 20), rng.normal(size=20) * 1e-7])
    vals[:3, 1] = [0, 1, 2]
    df = MixedDataFrame(schema, vals)
    write_csv(df, tmp_path / "d.csv")
    write_schema(schema, tmp_path / "s.json")
    back = load_csv(tmp_path / "d.csv", tmp_path / "s.json")
    assert back.schema == df.schema
    np.testing.assert_array_equal(back.values, df.values)


def test_labels_round_trip(tmp_path):
    y = LabelVector.from_values([1, 0, 2, 1])
    assert y.classes == ("0", "1", "2")
    write_labels(y, tmp_path / "y.csv")
    back = load_labels(tmp_path / "y.csv")
    np.testing.assert_array_equal(back.codes, y.codes)
    assert back.classes == y.classes


def test_degenerate_labels():
    with pytest.raises(DataError, match="degenerate"):
        LabelVector.from_values([1, 1, 1]).require_supervised()


# link measures --------------------------------------------------------------

def _pearson_two_pass(u, x):
    n = len(u)
    mu, mx = sum(u) / n, sum(x) / n
    cov = sum((a - mu) * (b - mx) for a, b in zip(u, x)) / n
    su = (sum((a - mu) ** 2 for a in u) / n) ** 0.5
    sx = (sum((b - mx) ** 2 for b in x) / n) ** 0.5
    return (cov / (su * sx)) ** 2


def _anova_eta2(u, g):
    n = len(u)
    mean = sum(u) / n
    total = sum((a - mean) ** 2 for a in u)
    within = 0.0
    for level in set(g):
        vals = [a for a, b in zip(u, g) if b == level]
        m = sum(vals) / len(vals)
        within += sum((a - m) ** 2 for a in vals)
    return 1.0 - within / total


def test_r2_identity_and_affine():
    x = np.array([0.3, 1.2, -0.7, 2.2, 0.1])
    assert squared_correlation(x, x) == pytest.approx(1.0, abs=1e-12)
    assert squared_correlation(-2 * x + 7, x) == pytest.approx(1.0, abs=1e-12)


def test_r2_oracle():
    u, x = [1, 2, 3, 4], [1, 2, 2, 4]
    assert squared_correlation(u, x) == pytest.approx(_pearson_two_pass(u, x), abs=1e-12)
    # cov = 1.125, var(u) = 1.25, var(x) = 1.1875
    assert squared_correlation(u, x) == pytest.approx(1.125 ** 2 / (1.25 * 1.1875), abs=1e-12)


def test_r2_constant_error():
    with pytest.raises(DataError, match="constant"):
        squared_correlation([1, 1, 1], [1, 2, 3])


def test_eta2_examples():
    assert correlation_ratio([1, 1, 5, 5, 2, 2], [0, 0, 1, 1, 2, 2]) == pytest.approx(1.0)
    u, g = [1, 2, 3, 4], [0, 0, 1, 1]
    assert correlation_ratio(u, g) == pytest.approx(_anova_eta2(u, g), abs=1e-12)
    assert correlation_ratio(u, g) == pytest.approx(0.8, abs=1e-12)


def test_eta2_degenerate_grouping():
    with pytest.raises(DataError):
        correlation_ratio([1, 2, 3], [0, 0, 0])
    with pytest.raises(DataError, match="empty level"):
        correlation_ratio([1, 2, 3], [0, 0, 2])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 12, elements=finite), arrays(np.float64, 12, elements=finite),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_r2_properties(u, x, a, b):
    if np.std(u) < 1e-3 or np.std(x) < 1e-3:
        return
    r = squared_correlation(u, x)
    assert 0.0 <= r <= 1.0
    assert r == pytest.approx(squared_correlation(x, u), abs=1e-12)
    assert r == pytest.approx(squared_correlation(a * u + b, x), abs=1e-9)
    assert r == pytest.approx(_pearson_two_pass(list(u), list(x)), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 15, elements=finite), st.lists(st.integers(0, 3), min_size=15, max_size=15))
def test_eta2_matches_anova(u, g):
    g = np.array(g)
    if np.std(u) < 1e-3:
        return
    _, g = np.unique(g, return_inverse=True)
    if g.max() == 0:
        return
    e = correlation_ratio(u, g)
    assert 0.0 <= e <= 1.0
    assert e == pytest.approx(_anova_eta2(list(u), list(g)), abs=1e-9)
