"""
Tracking metrics: mean squared error and dynamic time warping.

DTW uses the absolute difference as local cost, the symmetric step set
{(1, 0), (0, 1), (1, 1)}, no warping window, and boundary conditions
equivalent to padding the accumulated-cost matrix with +inf.  Backtracking
breaks ties diagonal first, then vertical (i - 1), then horizontal (j - 1).
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kicktrack.errors import EmptySeries, KicktrackError, LengthMismatch


@dataclass(eq=False)
class Series:
    """One axis of a trajectory; ``sample_rate`` is metadata only."""

    values: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size == 0:
            raise EmptySeries("series is empty")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")

    def __len__(self):
        return self.values.size

    @property
    def times(self):
        return np.arange(self.values.size) / self.sample_rate


def _values(s):
    if isinstance(s, Series):
        return s.values
    arr = np.asarray(s, dtype=float).reshape(-1)
    if arr.size == 0:
        raise EmptySeries("series is empty")
    return arr


def mse(a, b):
    """Mean squared error between two equally long series."""
    a, b = _values(a), _values(b)
    if a.size != b.size:
        raise LengthMismatch(f"series lengths differ: {a.size} vs {b.size}")
    d = a - b
    return float(np.mean(d * d))


@dataclass(eq=False)
class DtwResult:
    cost_matrix: np.ndarray
    distance: float
    path: list = field(default_factory=list)

    @property
    def shape(self):
        return self.cost_matrix.shape

    def path_array(self):
        return np.asarray(self.path, dtype=int).reshape(-1, 2)


def accumulated_cost(a, b):
    """Accumulated-cost matrix D for local cost |a_i - b_j|.

    Cells are filled one anti-diagonal at a time, which vectorises the
    recurrence without changing its arithmetic: every cell is still
    ``cost + min(diag, up, left)`` evaluated in double precision.
    """
    a, b = _values(a), _values(b)
    n, m = a.size, b.size
    cost = np.abs(a[:, None] - b[None, :])
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for s in range(n + m - 1):
        i = np.arange(max(0, s - m + 1), min(n, s + 1))
        j = s - i
        prev = np.minimum(np.minimum(D[i, j], D[i, j + 1]), D[i + 1, j])
        D[i + 1, j + 1] = cost[i, j] + prev
    return D[1:, 1:]


def backtrack(D):
    """Warping path from (0, 0) to (n-1, m-1) through ``D``."""
    i, j = D.shape[0] - 1, D.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = D[i - 1, j - 1], D[i - 1, j], D[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path


def dtw(a, b, normalize=False):
    """Dynamic time warping between two 1-D series.

    Args:
        a, b: :class:`Series` or array-like, non-empty.
        normalize: divide the reported distance by the path length.  The
            cost matrix is never normalized.

    Returns:
        DtwResult with the accumulated-cost matrix, the minimum path
        distance ``D[n-1, m-1]`` and the backtracked warping path.
    """
    D = accumulated_cost(a, b)
    path = backtrack(D)
    distance = float(D[-1, -1])
    if normalize:
        distance /= len(path)
    return DtwResult(D, distance, path)


def path_cost(a, b, path):
    """Sum of |a_i - b_j| along ``path``."""
    a, b = _values(a), _values(b)
    idx = np.asarray(path, dtype=int).reshape(-1, 2)
    return float(np.abs(a[idx[:, 0]] - b[idx[:, 1]]).sum())


def diagonal_deviation(result):
    """max over the path of |i (m-1)/(n-1) - j|.

    With a single row the reference column is 0, so the statistic is m - 1.
    """
    n, m = result.cost_matrix.shape
    idx = result.path_array()
    if n == 1:
        expected = np.zeros(len(idx))
    else:
        expected = idx[:, 0] * (m - 1) / (n - 1)
    return float(np.max(np.abs(expected - idx[:, 1])))


def dtw_alignment_segments(result, a, b):
    """One ((t_a, a_i), (t_b, b_j)) segment per warping-path element.

    Timestamps come from each series' sample rate; bare arrays are taken to
    be sampled at 1 Hz (timestamps equal indices).
    """
    sa = a if isinstance(a, Series) else Series(a)
    sb = b if isinstance(b, Series) else Series(b)
    ta, tb = sa.times, sb.times
    return [((float(ta[i]), float(sa.values[i])), (float(tb[j]), float(sb.values[j])))
            for i, j in result.path]


def write_matrix_csv(matrix, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(matrix):
            writer.writerow([repr(float(v)) for v in row])


def write_path_csv(path_pairs, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j"])
        writer.writerows((int(i), int(j)) for i, j in path_pairs)


def write_segments_csv(segments, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_a", "va", "t_b", "vb"])
        for (t_a, va), (t_b, vb) in segments:
            writer.writerow([repr(t_a), repr(va), repr(t_b), repr(vb)])


def dtw_path_heatmap_export(result, path):
    """Write the data behind a DTW heat-map figure.

    ``path`` is a file prefix.  Produces ``<prefix>_matrix.csv`` (row-major
    accumulated costs, n rows by m columns), ``<prefix>_path.csv`` (``i,j``)
    and ``<prefix>_summary.json`` with the distance and the diagonal
    deviation statistic, which is also returned.

    Raises:
        KicktrackError: wrapping any OSError while writing.
    """
    prefix = Path(path)
    deviation = diagonal_deviation(result)
    try:
        prefix.parent.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(result.cost_matrix, f"{prefix}_matrix.csv")
        write_path_csv(result.path, f"{prefix}_path.csv")
        with open(f"{prefix}_summary.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "rows": int(result.cost_matrix.shape[0]),
                    "cols": int(result.cost_matrix.shape[1]),
                    "distance": result.distance,
                    "path_length": len(result.path),
                    "diagonal_deviation": deviation,
                },
                fh,
                indent=2,
            )
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return deviation


class IoError(KicktrackError, OSError):
    pass
