"""
Digitized ankle tracks and the setpoint trajectories built from them.

A track is a CSV of pixel positions (``frame,x_px,y_px``) with a JSON
sidecar holding ``frame_rate_hz``, ``pixels_per_meter``, ``subject_id`` and
``segment_id``.  The sidecar lives next to the track with the same stem
(``S1-T1.csv`` -> ``S1-T1.json``).
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kicktrack.errors import (
    EmptyTrack,
    InvalidParameters,
    NonMonotonicFrames,
    ParseError,
    TrackGapTooLong,
)

TRACK_HEADER = ["frame", "x_px", "y_px"]
TRAJECTORY_HEADER = ["t", "x", "z"]
MAX_GAP_S = 0.5


@dataclass(eq=False)
class RawTrack:
    """Frame-indexed pixel samples.  ``samples`` has columns frame, x_px, y_px."""

    samples: np.ndarray
    frame_rate: float
    subject_id: str = ""
    segment_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)
        if len(self.samples) == 0:
            raise EmptyTrack("track has no samples")
        if not (math.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise InvalidParameters(f"frame_rate must be > 0, got {self.frame_rate}")
        if np.any(np.diff(self.samples[:, 0]) <= 0):
            raise NonMonotonicFrames("frame indices must be strictly increasing")

    @property
    def frames(self):
        return self.samples[:, 0].astype(int)

    @property
    def label(self):
        if self.subject_id and self.segment_id:
            return f"{self.subject_id}-{self.segment_id}"
        return self.subject_id or self.segment_id


@dataclass(frozen=True)
class Calibration:
    pixels_per_meter: float

    def __post_init__(self):
        if not (math.isfinite(self.pixels_per_meter) and self.pixels_per_meter > 0):
            raise InvalidParameters(f"pixels_per_meter must be > 0, got {self.pixels_per_meter}")


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled planar setpoints; point k is at time k / sample_rate.

    ``points`` has columns (x, z) in meters.  ``y`` is the fixed out-of-plane
    coordinate used when the trajectory is flown.
    """

    sample_rate: float
    points: np.ndarray
    y: float = 0.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.sample_rate = float(self.sample_rate)
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InvalidParameters(f"sample_rate must be > 0, got {self.sample_rate}")
        if len(self.points) == 0:
            raise EmptyTrack("trajectory has no points")
        if not np.all(np.isfinite(self.points)):
            raise InvalidParameters("trajectory has non-finite coordinates")

    def __len__(self):
        return len(self.points)

    @property
    def duration(self):
        return len(self.points) / self.sample_rate

    @property
    def times(self):
        return np.arange(len(self.points)) / self.sample_rate

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def z(self):
        return self.points[:, 1]

    def position(self, k):
        """3-D setpoint for sample ``k``."""
        x, z = self.points[k]
        return np.array([x, self.y, z])


def sidecar_path(track_path):
    return Path(track_path).with_suffix(".json")


def load_track_metadata(path):
    """Read the JSON sidecar of a track (or the sidecar file itself)."""
    path = Path(path)
    meta_path = path if path.suffix == ".json" else sidecar_path(path)
    try:
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise ParseError("missing track metadata sidecar", path=meta_path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=meta_path, line=exc.lineno) from exc
    for key in ("frame_rate_hz", "pixels_per_meter"):
        if key not in meta:
            raise ParseError(f"sidecar lacks required key {key!r}", path=meta_path)
    return meta


def load_track(path, metadata=None):
    """Parse a track CSV (``frame,x_px,y_px``) and its sidecar.

    Args:
        path: track CSV file.
        metadata: mapping with at least ``frame_rate_hz``; read from the
            sidecar when omitted.

    Raises:
        ParseError: unreadable file, bad header or malformed row (the error
            carries the 1-based line number).
        NonMonotonicFrames: frame indices not strictly increasing.
        EmptyTrack: header present but no samples.
    """
    path = Path(path)
    if metadata is None:
        metadata = load_track_metadata(path)
    rows = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyTrack("empty file", path=path, line=1)
            if [h.strip() for h in header] != TRACK_HEADER:
                raise ParseError(f"expected header {','.join(TRACK_HEADER)}", path=path, line=1)
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise ParseError(f"expected 3 fields, got {len(row)}", path=path, line=line)
                try:
                    frame = int(row[0])
                    x_px, y_px = float(row[1]), float(row[2])
                except ValueError as exc:
                    raise ParseError(f"bad value: {exc}", path=path, line=line) from None
                if not (math.isfinite(x_px) and math.isfinite(y_px)):
                    raise ParseError("non-finite coordinate", path=path, line=line)
                if rows and frame <= rows[-1][0]:
                    raise NonMonotonicFrames(
                        f"frame {frame} does not follow frame {rows[-1][0]}", path=path, line=line
                    )
                rows.append((frame, x_px, y_px))
    except FileNotFoundError as exc:
        raise ParseError("file not found", path=path) from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc.reason}", path=path) from exc
    if not rows:
        raise EmptyTrack("track has no samples", path=path)
    return RawTrack(
        np.array(rows, dtype=float),
        float(metadata["frame_rate_hz"]),
        str(metadata.get("subject_id", "")),
        str(metadata.get("segment_id", "")),
    )


def calibrate(raw, cal, max_gap_s=MAX_GAP_S):
    """Convert pixels to meters and fill missing frames.

    x grows with x_px.  Image rows grow downward, so z is measured up from
    the lowest point of the track: ``z = (max(y_px) - y_px) / ppm``.  Missing
    frames are linearly interpolated; a gap longer than ``max_gap_s`` raises
    :class:`TrackGapTooLong`.
    """
    frames = raw.samples[:, 0]
    gaps = np.diff(frames)
    if gaps.size and (gaps.max() - 1) / raw.frame_rate > max_gap_s:
        raise TrackGapTooLong(
            f"{int(gaps.max()) - 1} missing frames exceed {max_gap_s} s at {raw.frame_rate} Hz"
        )
    ppm = cal.pixels_per_meter
    y_ref = raw.samples[:, 2].max()
    x = raw.samples[:, 1] / ppm
    z = (y_ref - raw.samples[:, 2]) / ppm
    if gaps.size and gaps.max() > 1:
        full = np.arange(frames[0], frames[-1] + 1)
        x = np.interp(full, frames, x)
        z = np.interp(full, frames, z)
    return Trajectory(raw.frame_rate, np.column_stack((x, z)))


def resample(traj, new_rate):
    """Linearly interpolate onto a uniform grid at ``new_rate``.

    The new grid spans the same first-to-last sample interval and keeps both
    endpoints exactly; its step is the closest to ``1/new_rate`` that fits a
    whole number of steps into that interval, and the returned
    ``sample_rate`` reports that step.
    """
    if not (math.isfinite(new_rate) and new_rate > 0):
        raise InvalidParameters(f"new_rate must be > 0, got {new_rate}")
    n = len(traj)
    if new_rate == traj.sample_rate or n == 1:
        return Trajectory(new_rate, traj.points.copy(), traj.y)
    span = (n - 1) / traj.sample_rate
    m = max(2, int(round(span * new_rate)) + 1)
    # positions in units of original samples; integer knots interpolate exactly
    u = np.arange(m) * ((n - 1) / (m - 1))
    u[-1] = n - 1
    idx = np.arange(n)
    pts = np.column_stack((np.interp(u, idx, traj.x), np.interp(u, idx, traj.z)))
    return Trajectory((m - 1) / span, pts, traj.y)


def to_workspace(traj, origin, scale=1.0):
    """Center the path on ``origin`` (x, z) and scale it; y is set to origin y."""
    if not scale > 0:
        raise InvalidParameters(f"scale must be > 0, got {scale}")
    origin = np.asarray(origin, dtype=float).reshape(3)
    centroid = traj.points.mean(axis=0)
    pts = origin[[0, 2]] + scale * (traj.points - centroid)
    return Trajectory(traj.sample_rate, pts, float(origin[1]))


def write_trajectory_csv(traj, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for t, (x, z) in zip(traj.times, traj.points):
            writer.writerow([repr(float(t)), repr(float(x)), repr(float(z))])


def load_trajectory_csv(path, sample_rate=None):
    """Read a ``t,x,z`` trajectory export.

    The sample rate is inferred from the timestamps unless given; timestamps
    must be uniform to 1e-6 relative.
    """
    path = Path(path)
    try:
        data = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != TRAJECTORY_HEADER:
                raise ParseError(f"expected header {','.join(TRAJECTORY_HEADER)}", path=path, line=1)
            for row in reader:
                if not row:
                    continue
                if len(row) != 3:
                    raise ParseError(f"expected 3 fields, got {len(row)}", path=path, line=reader.line_num)
                try:
                    data.append([float(v) for v in row])
                except ValueError as exc:
                    raise ParseError(f"bad value: {exc}", path=path, line=reader.line_num) from None
    except FileNotFoundError as exc:
        raise ParseError("file not found", path=path) from exc
    if not data:
        raise EmptyTrack("trajectory has no points", path=path)
    arr = np.array(data)
    if sample_rate is None:
        if len(arr) < 2:
            raise ParseError("cannot infer sample rate from a single point", path=path)
        dts = np.diff(arr[:, 0])
        dt = (arr[-1, 0] - arr[0, 0]) / (len(arr) - 1)
        if dt <= 0 or np.max(np.abs(dts - dt)) > 1e-6 * dt:
            raise ParseError("timestamps are not uniformly spaced", path=path)
        sample_rate = 1.0 / dt
    return Trajectory(sample_rate, arr[:, 1:])


def load_trajectory_source(path):
    """Load a setpoint path from a track CSV (+ sidecar) or a ``t,x,z`` export.

    Returns ``(trajectory, metadata)``; metadata is the sidecar content for
    tracks and an empty dict for exports.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
    except FileNotFoundError as exc:
        raise ParseError("file not found", path=path) from exc
    if [h.strip() for h in first.split(",")] == TRAJECTORY_HEADER:
        return load_trajectory_csv(path), {}
    meta = load_track_metadata(path)
    raw = load_track(path, meta)
    return calibrate(raw, Calibration(float(meta["pixels_per_meter"]))), meta


def sinusoid(duration, rate, amplitude=(0.1, 0.0), frequency=(1.0, 1.0), phase=(0.0, 0.0), offset=(0.0, 0.0)):
    """Synthetic kicking-like path: independent sinusoids on x and z.

    Point k is ``offset + amplitude * sin(2 pi f t_k + phase)`` per axis, with
    ``round(duration * rate)`` points.
    """
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    amplitude, frequency = np.asarray(amplitude, float), np.asarray(frequency, float)
    phase, offset = np.asarray(phase, float), np.asarray(offset, float)
    pts = offset + amplitude * np.sin(2.0 * np.pi * frequency * t[:, None] + phase)
    return Trajectory(rate, pts)
