import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebridge.data import (
    CsvFormatError,
    Scaler,
    SplitSpec,
    TimeSeriesFrame,
    chronological_split,
    load_csv,
    save_csv,
    stack_windows,
    standardize,
    windows,
)


def _frame(T, C=2, seed=0):
    return TimeSeriesFrame([f"c{i}" for i in range(C)], np.random.default_rng(seed).standard_normal((T, C)))


def test_load_small_fixture(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("date,HUFL,OT\n2020-01-01,1.5,2\n2020-01-02,3,4.25\n2020-01-03,-1,0\n")
    f = load_csv(p)
    assert f.channel_names == ["HUFL", "OT"]
    assert f.values.shape == (3, 2)
    assert f.timestamps[0] == "2020-01-01"
    np.testing.assert_array_equal(f.values[1], [3.0, 4.25])


def test_non_numeric_cell_names_row_and_column(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("HUFL,OT\n1,abc\n2,3\n")
    with pytest.raises(CsvFormatError, match=r"row 2, column 'OT'"):
        load_csv(p)


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("", "empty"),
        ("a,b\n", "no data rows"),
        ("a,b\n1,2\n3\n", "row 3 has 1 cells"),
        ("a,b\n1,nan\n", "non-finite"),
        ("a,b\n1,\n", "row 2, column 'b'"),
    ],
)
def test_malformed_files(tmp_path, text, pattern):
    p = tmp_path / "f.csv"
    p.write_text(text)
    with pytest.raises(CsvFormatError, match=pattern):
        load_csv(p)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_save_load_round_trip_is_exact(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-8, 8, (7, 3))
    f = TimeSeriesFrame(["a", "b", "c"], vals, [f"t{i}" for i in range(7)])
    p = tmp_path_factory.mktemp("rt") / "f.csv"
    save_csv(f, p)
    g = load_csv(p)
    np.testing.assert_array_equal(g.values, f.values)
    assert g.timestamps == f.timestamps


def test_split_counts_and_ratios():
    f = _frame(10)
    a, b, c = chronological_split(f, SplitSpec(6, 2, 2))
    np.testing.assert_array_equal(a.values, f.values[:6])
    np.testing.assert_array_equal(b.values, f.values[6:8])
    np.testing.assert_array_equal(c.values, f.values[8:])
    assert SplitSpec(0.7, 0.1, 0.2).lengths(100) == (70, 10, 20)


@settings(max_examples=40, deadline=None)
@given(st.integers(40, 300), st.floats(0.3, 0.8), st.floats(0.05, 0.1))  # every segment non-empty
def test_split_is_a_prefix_partition(T, tr, va):
    f = _frame(T)
    parts = chronological_split(f, SplitSpec(tr, va, 1.0 - tr - va))
    joined = np.concatenate([p.values for p in parts])
    np.testing.assert_array_equal(joined, f.values[: len(joined)])


@pytest.mark.parametrize("spec", [SplitSpec(8, 2, 2), SplitSpec(0.8, 0.3, 0.2), SplitSpec(0.999, 0.0005, 0.0005)])
def test_split_errors(spec):
    with pytest.raises(ValueError):
        spec.lengths(10)


def test_standardize_uses_train_statistics():
    train = TimeSeriesFrame(["x"], np.arange(10.0)[:, None])
    val = TimeSeriesFrame(["x"], np.arange(100.0, 110.0)[:, None])
    (tr, va), sc = standardize(train, val)
    assert abs(tr.values.mean()) < 1e-12
    assert abs(tr.values.std() - 1.0) < 1e-12
    assert va.values.mean() == pytest.approx((104.5 - 4.5) / np.arange(10.0).std())
    np.testing.assert_allclose(sc.inverse(va.values), val.values, atol=1e-12)


def test_standardize_rejects_constant_channel():
    f = TimeSeriesFrame(["ok", "flat"], np.column_stack([np.arange(5.0), np.ones(5)]))
    with pytest.raises(ValueError, match="'flat'"):
        standardize(f)


def test_scaler_json_round_trip():
    (_,), sc = standardize(_frame(20, 3))
    back = Scaler.from_json(sc.to_json())
    np.testing.assert_array_equal(back.mean, sc.mean)
    np.testing.assert_array_equal(back.std, sc.std)
    assert back.channel_names == sc.channel_names


def test_window_count_and_indexing():
    f = TimeSeriesFrame(["a"], np.arange(10.0)[:, None])
    w = windows(f, 4, 2, 1)
    assert len(w) == 5
    x0, y0 = w[0]
    assert x0.shape == (1, 4) and y0.shape == (1, 2)
    assert y0[0, 0] == f.values[4, 0]


def test_non_overlapping_windows_tile_prefix():
    f = _frame(23, 2)
    w = windows(f, 4, 2, stride=6)
    xs, ys = stack_windows(w)
    tiled = np.concatenate([np.concatenate([x, y], axis=1) for x, y in zip(xs, ys)], axis=1)
    np.testing.assert_array_equal(tiled, f.values[: 6 * len(w)].T)


@settings(max_examples=40, deadline=None)
@given(st.integers(6, 60), st.integers(1, 5), st.integers(1, 5), st.integers(1, 4))
def test_window_count_formula(T, I, O, stride):
    if T < I + O:
        with pytest.raises(ValueError):
            windows(_frame(T), I, O, stride)
        return
    assert len(windows(_frame(T), I, O, stride)) == (T - I - O) // stride + 1


def test_frame_validation():
    with pytest.raises(ValueError):
        TimeSeriesFrame(["a"], np.ones((3, 2)))
    with pytest.raises(ValueError):
        TimeSeriesFrame(["a"], np.array([[1.0], [np.inf]]))
