import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kicktrack import metrics
from kicktrack.errors import EmptySeries, LengthMismatch


def monotone_paths(n, m):
    """Every path from (0, 0) to (n-1, m-1) using steps (1,0), (0,1), (1,1)."""
    def extend(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                yield from extend(path + [(i + di, j + dj)])

    yield from extend([(0, 0)])


def brute_force_dtw(a, b):
    return min(sum(abs(a[i] - b[j]) for i, j in p) for p in monotone_paths(len(a), len(b)))


def lagged_pair(s, k):
    """``b`` is ``a`` delayed by k samples; both padded to the same length."""
    a = np.concatenate([s, np.full(k, s[-1])])
    b = np.concatenate([np.full(k, s[0]), s])
    return a, b


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
series = st.lists(finite, min_size=1, max_size=12)


def test_mse_examples():
    assert metrics.mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert metrics.mse([0.0, 0.0], [0.1, -0.1]) == pytest.approx(0.01, abs=1e-15)


def test_mse_rejects_length_mismatch():
    with pytest.raises(LengthMismatch):
        metrics.mse([0.0, 1.0], [0.0])


def test_empty_series_rejected():
    with pytest.raises(EmptySeries):
        metrics.dtw([], [1.0])
    with pytest.raises(EmptySeries):
        metrics.Series([])


def test_dtw_identical_is_zero_and_diagonal():
    r = metrics.dtw([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
    assert r.distance == 0.0
    assert r.path == [(0, 0), (1, 1), (2, 2)]


def test_dtw_two_by_one_matches_enumeration():
    # the only path is (0,0) -> (1,0): |0-1| + |1-1| = 1
    a, b = [0.0, 1.0], [1.0]
    assert brute_force_dtw(a, b) == 1.0
    r = metrics.dtw(a, b)
    assert r.distance == 1.0
    assert r.path == [(0, 0), (1, 0)]
    np.testing.assert_array_equal(r.cost_matrix, [[1.0], [1.0]])


def test_dtw_matches_enumeration_on_small_integer_series():
    rng = np.random.default_rng(11)
    for _ in range(300):
        a = rng.integers(-3, 4, rng.integers(1, 6)).astype(float)
        b = rng.integers(-3, 4, rng.integers(1, 6)).astype(float)
        assert metrics.dtw(a, b).distance == brute_force_dtw(a, b)


def test_enumeration_counts_delannoy_paths():
    # paths with steps E, N, NE form the Delannoy numbers
    assert sum(1 for _ in monotone_paths(3, 3)) == 13
    assert sum(1 for _ in monotone_paths(4, 4)) == 63


def test_accumulated_cost_matches_scalar_recurrence():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=9), rng.normal(size=6)
    D = np.full((10, 7), np.inf)
    D[0, 0] = 0.0
    for i in range(9):
        for j in range(6):
            D[i + 1, j + 1] = abs(a[i] - b[j]) + min(D[i, j], D[i, j + 1], D[i + 1, j])
    np.testing.assert_array_equal(metrics.accumulated_cost(a, b), D[1:, 1:])


def test_backtrack_prefers_diagonal_then_vertical():
    # all-zero costs tie everywhere
    r = metrics.dtw([0.0, 0.0, 0.0], [0.0, 0.0])
    assert r.path == [(0, 0), (1, 0), (2, 1)]


@settings(max_examples=200, deadline=None)
@given(series, series)
def test_dtw_symmetry(a, b):
    assert metrics.dtw(a, b).distance == metrics.dtw(b, a).distance


@settings(max_examples=200, deadline=None)
@given(series)
def test_dtw_identity(a):
    r = metrics.dtw(a, a)
    assert r.distance == 0.0
    assert r.path == [(i, i) for i in range(len(a))]


@settings(max_examples=200, deadline=None)
@given(series, series)
def test_dtw_path_properties(a, b):
    r = metrics.dtw(a, b)
    p = r.path_array()
    assert tuple(p[0]) == (0, 0)
    assert tuple(p[-1]) == (len(a) - 1, len(b) - 1)
    steps = np.diff(p, axis=0)
    assert np.all((steps >= 0) & (steps <= 1)) and np.all(steps.sum(axis=1) >= 1)
    assert metrics.path_cost(a, b, r.path) == pytest.approx(r.distance, abs=1e-12)
    assert r.distance >= max(abs(a[0] - b[0]), abs(a[-1] - b[-1]))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(finite, min_size=n, max_size=n), st.lists(finite, min_size=n, max_size=n))))
def test_dtw_bounded_by_diagonal_path(pair):
    a, b = pair
    assert metrics.dtw(a, b).distance <= float(np.abs(np.subtract(a, b)).sum())


def test_normalize_divides_by_path_length():
    a, b = [0.0, 1.0, 3.0], [1.0, 2.0]
    raw = metrics.dtw(a, b)
    norm = metrics.dtw(a, b, normalize=True)
    assert norm.distance == raw.distance / len(raw.path)
    np.testing.assert_array_equal(norm.cost_matrix, raw.cost_matrix)


@pytest.mark.parametrize("k", [1, 2, 3, 7])
def test_constructed_lag_gives_deviation_k(k):
    s = np.sin(np.linspace(0, 3, 40)) + np.linspace(0, 1, 40)
    a, b = lagged_pair(s, k)
    r = metrics.dtw(a, b)
    assert r.distance == 0.0
    assert metrics.diagonal_deviation(r) == k
    # the middle of the path runs along the diagonal shifted by k
    assert all(j - i == k for i, j in r.path if k <= j and i <= len(s) - 1)


def test_diagonal_deviation_edge_cases():
    assert metrics.diagonal_deviation(metrics.dtw([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])) == 0.0
    # a single row has no diagonal slope; the reference column is 0
    assert metrics.diagonal_deviation(metrics.dtw([1.0], [1.0, 2.0, 5.0])) == 2.0


def test_alignment_segments():
    a = metrics.Series([0.0, 1.0, 2.0, 2.0], sample_rate=2.0)
    b = metrics.Series([0.0, 0.0, 1.0, 2.0], sample_rate=2.0)
    r = metrics.dtw(a, b)
    segs = metrics.dtw_alignment_segments(r, a, b)
    assert len(segs) == len(r.path)
    assert segs[0] == ((0.0, 0.0), (0.0, 0.0))
    assert segs[-1] == ((1.5, 2.0), (1.5, 2.0))
    same = metrics.dtw_alignment_segments(metrics.dtw(a, a), a, a)
    assert all(ta == tb for (ta, _), (tb, _) in same)


def test_heatmap_export(tmp_path):
    s = np.linspace(0, 1, 12) ** 2
    a, b = lagged_pair(s, 2)
    b = b[:-1]
    r = metrics.dtw(a, b)
    dev = metrics.dtw_path_heatmap_export(r, tmp_path / "run_x")
    matrix = np.loadtxt(tmp_path / "run_x_matrix.csv", delimiter=",")
    assert matrix.shape == (len(a), len(b))
    np.testing.assert_array_equal(matrix, r.cost_matrix)
    path = np.loadtxt(tmp_path / "run_x_path.csv", delimiter=",", skiprows=1, dtype=int)
    np.testing.assert_array_equal(path, r.path_array())
    summary = json.loads((tmp_path / "run_x_summary.json").read_text())
    assert summary["diagonal_deviation"] == dev == metrics.diagonal_deviation(r)
    assert summary["distance"] == r.distance


def test_heatmap_export_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    r = metrics.dtw([1.0], [1.0])
    with pytest.raises(metrics.IoError):
        metrics.dtw_path_heatmap_export(r, blocker / "sub" / "out")


def test_oracle_agrees_on_exhaustive_tiny_cases():
    values = (-1.0, 0.0, 2.0)
    for n, m in itertools.product(range(1, 3), repeat=2):
        for a in itertools.product(values, repeat=n):
            for b in itertools.product(values, repeat=m):
                assert metrics.dtw(a, b).distance == brute_force_dtw(a, b)
