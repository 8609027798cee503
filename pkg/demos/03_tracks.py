"""
From a digitized ankle track to flyable setpoints.

The sample track in tests/fixtures has 30 fps pixel coordinates with one
dropped frame.  Calibration turns pixels into meters (image y points down,
so it is flipped into z), the gap is filled, and the path is centered in the
robot's flight volume.

Run with ``python demos/03_tracks.py``.
"""

import tempfile
from pathlib import Path

import numpy as np

from kicktrack import trajectory as tr

track_path = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "S1-T1.csv"
meta = tr.load_track_metadata(track_path)
raw = tr.load_track(track_path, meta)
print(f"{raw.label}: {len(raw.samples)} samples at {raw.frame_rate} fps, "
      f"frames {raw.frames[0]}..{raw.frames[-1]}")

traj = tr.calibrate(raw, tr.Calibration(meta["pixels_per_meter"]))
print(f"after gap filling: {len(traj)} points, {traj.duration:.2f} s")
print(f"x range {np.ptp(traj.x) * 100:.1f} cm, z range {np.ptp(traj.z) * 100:.1f} cm")

# Place it 1 m above the origin at 80% scale
flown = tr.to_workspace(traj, origin=[0.0, 0.0, 1.0], scale=0.8)
print("workspace centroid (x, z):", flown.points.mean(axis=0).round(12))

# Upsample to 60 Hz for a faster command stream
fast = tr.resample(flown, 60.0)
print(f"resampled: {len(fast)} points at {fast.sample_rate:.3f} Hz, endpoints kept: "
      f"{np.array_equal(fast.points[[0, -1]], flown.points[[0, -1]])}")

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "S1-T1_setpoints.csv"
    tr.write_trajectory_csv(fast, out)
    print("exported", out.name)
    print(out.read_text().splitlines()[:3])
