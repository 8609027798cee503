"""
The full experiment pipeline on the committed fixture.

Three configs fly the same track: the geometric controller in clean
simulation, and both controllers with 100 ms of command latency.  The
flight logs are scored and pivoted into the two result tables.  The same
steps are available from the shell:

    kicktrack batch tests/fixtures/configs --out-dir logs
    kicktrack evaluate logs/*.csv --out rows.csv --dtw-artifacts dtw
    kicktrack table rows.csv

Run with ``python demos/05_pipeline.py``.
"""

import tempfile
from pathlib import Path

from kicktrack import report, simharness as sh

configs = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "configs"

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    statuses = sh.run_batch(configs, tmp / "logs", workers=3)
    for stem, status in statuses.items():
        print(f"{stem:<18} {status}")

    logs = sorted((tmp / "logs").glob("*.csv"))
    rows = report.evaluate_logs(logs, artifacts_dir=tmp / "dtw")
    report.write_rows_csv(rows, tmp / "rows.csv")
    print(f"\n{len(rows)} evaluation rows, {len(list((tmp / 'dtw').iterdir()))} DTW artifact files\n")
    print(report.render_table(rows))
