"""
Evaluation rows and the MSE / DTW result tables.

Rows are stored in SI units.  Rendering pivots them into one table per
metric with axis/condition rows and subject-segment columns; MSE cells are
printed in units of 1e-3 m^2, DTW cells unscaled.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from kicktrack import metrics
from kicktrack.errors import KicktrackError, ParseError
from kicktrack.simharness import extract_comparison_series, read_flight_log

ROWS_HEADER = ["subject_segment", "metric", "axis", "condition", "value"]
METRICS = ("mse", "dtw")
AXES = ("x", "z")
CONDITIONS = ("sim", "pid", "nonlinear")
CONDITION_LABELS = {"sim": "Sim", "pid": "PID", "nonlinear": "Non Lin"}
TITLES = {
    "mse": "Mean Squared Error (All Values in x10^-3)",
    "dtw": "Dynamic Time Warping Minimum Path Distance",
}
SCALE = {"mse": 1e3, "dtw": 1.0}


class EvaluationError(KicktrackError):
    pass


@dataclass(frozen=True)
class EvaluationRow:
    subject_segment: str
    metric: str
    axis: str
    condition: str
    value: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"value must be finite and >= 0, got {self.value}")

    @property
    def key(self):
        return (self.subject_segment, self.metric, self.axis, self.condition)


def sort_key(row):
    return (
        row.subject_segment,
        CONDITIONS.index(row.condition),
        METRICS.index(row.metric),
        AXES.index(row.axis),
    )


def evaluate_log(log, normalize=False, artifacts_dir=None):
    """MSE and DTW rows (x and z) for one flight log.

    When ``artifacts_dir`` is given, the DTW matrix, path, segments and
    summary files for each axis are written there.
    """
    if not log.completed:
        raise EvaluationError(f"log did not complete: {log.failure}")
    commanded, actual = extract_comparison_series(log)
    if len(commanded) == 0:
        raise EvaluationError("log contains no replayed setpoints")
    segment = str(log.metadata.get("subject_segment", "run"))
    condition = log.metadata.get("condition", "sim")
    rate = float(log.metadata["command_rate_hz"])
    rows = []
    for col, axis in enumerate(AXES):
        a = metrics.Series(commanded[:, col], rate)
        b = metrics.Series(actual[:, col], rate)
        rows.append(EvaluationRow(segment, "mse", axis, condition, metrics.mse(a, b)))
        result = metrics.dtw(a, b, normalize=normalize)
        rows.append(EvaluationRow(segment, "dtw", axis, condition, result.distance))
        if artifacts_dir is not None:
            prefix = Path(artifacts_dir) / f"{segment}_{condition}_{axis}"
            metrics.dtw_path_heatmap_export(result, prefix)
            metrics.write_segments_csv(
                metrics.dtw_alignment_segments(result, a, b), f"{prefix}_segments.csv"
            )
    return rows


def evaluate_logs(paths, normalize=False, artifacts_dir=None, workers=1):
    """Evaluate several log files; rows come back sorted by subject_segment."""
    def one(path):
        return evaluate_log(read_flight_log(path), normalize, artifacts_dir)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, paths))
    else:
        chunks = [one(p) for p in paths]
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=sort_key)


def write_rows_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROWS_HEADER)
        for r in rows:
            writer.writerow([r.subject_segment, r.metric, r.axis, r.condition, repr(float(r.value))])


def read_rows_csv(path):
    path = Path(path)
    rows = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError("rows file is empty", path=path, line=1)
            if [h.strip() for h in header] != ROWS_HEADER:
                raise ParseError(f"expected header {','.join(ROWS_HEADER)}", path=path, line=1)
            for row in reader:
                if not row:
                    continue
                try:
                    seg, metric, axis, cond, value = row
                    rows.append(EvaluationRow(seg, metric, axis, cond, float(value)))
                except ValueError as exc:
                    raise ParseError(f"bad row: {exc}", path=path, line=reader.line_num) from None
    except FileNotFoundError as exc:
        raise ParseError("rows file not found", path=path) from exc
    if not rows:
        raise ParseError("rows file has no data rows", path=path)
    return rows


def _fmt(value, metric):
    return f"{value * SCALE[metric]:.3f}"


def render_table(rows):
    """Pivot rows into text tables, one per metric present.

    Every row lands in exactly one cell; duplicate keys raise
    :class:`EvaluationError` instead of being dropped.
    """
    cells = {}
    for r in rows:
        if r.key in cells:
            raise EvaluationError(f"duplicate evaluation row for {r.key}")
        cells[r.key] = r.value

    blocks = []
    for metric in METRICS:
        present = [r for r in rows if r.metric == metric]
        if not present:
            continue
        columns = sorted({r.subject_segment for r in present})
        row_keys = sorted(
            {(r.axis, r.condition) for r in present},
            key=lambda k: (AXES.index(k[0]), CONDITIONS.index(k[1])),
        )
        labels = [f"{axis} {CONDITION_LABELS[cond]}" for axis, cond in row_keys]
        body = []
        for (axis, cond), label in zip(row_keys, labels):
            line = [label]
            for col in columns:
                value = cells.get((col, metric, axis, cond))
                line.append("-" if value is None else _fmt(value, metric))
            body.append(line)
        header = [""] + columns
        widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
        text = [TITLES[metric]]
        text.append("  ".join(h.ljust(widths[0]) if i == 0 else h.rjust(widths[i])
                              for i, h in enumerate(header)).rstrip())
        for line in body:
            text.append("  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i])
                                  for i, c in enumerate(line)))
        blocks.append("\n".join(text))
    return "\n\n".join(blocks) + "\n"
