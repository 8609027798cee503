"""
Closed-loop tracking simulation.

A :class:`~kicktrack.trajectory.Trajectory` is replayed as position
setpoints with a zero-order hold at its sample rate.  The selected
controller and the rigid-body dynamics both run at the physics rate.  Runs
start with a settle-in hover at the first setpoint that is excluded from
all metrics.

Timing convention: record ``n`` is taken at ``t_n = n / physics_rate`` and
holds the state at ``t_n``, the command issued at or before ``t_n`` and the
wrench applied over ``[t_n, t_n+1)``.  Setpoint ``k`` is issued at
``settle + k / command_rate``; an optional command latency delays the moment
the controller sees it without changing the logged command.
"""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kicktrack import control, dynamics, trajectory as traj_mod
from kicktrack.errors import (
    DegenerateThrust,
    DivergedSimulation,
    InvalidParameters,
    NonFiniteState,
    ParseError,
)

LOG_HEADER = ["t", "cmd_x", "cmd_z", "x", "y", "z", "thrust", "mx", "my", "mz", "saturated"]
CONTROLLER_TYPES = ("pid", "geometric")
CONDITIONS = ("sim", "pid", "nonlinear")
_EPS = 1e-9


@dataclass(eq=False)
class ExperimentConfig:
    """Everything needed to reproduce one run.

    Either ``trajectory_source`` (a track CSV with sidecar, or a ``t,x,z``
    export) or an in-memory ``trajectory`` must be given.  The workspace
    mapping is applied to both.
    """

    controller_type: str = "geometric"
    gains: object = None
    robot: dynamics.RobotParams = field(default_factory=dynamics.RobotParams)
    physics_rate: float = 500.0
    command_rate_override: float = None
    trajectory_source: str = None
    trajectory: traj_mod.Trajectory = None
    workspace_origin: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    workspace_scale: float = 1.0
    initial_state: dynamics.RigidBodyState = None
    settle_time: float = 2.0
    divergence_bound: float = 10.0
    command_latency: float = 0.0
    allocation_mode: str = "saturate"
    seed: int = 0
    subject_segment: str = None
    condition: str = "sim"

    def __post_init__(self):
        if self.controller_type not in CONTROLLER_TYPES:
            raise InvalidParameters(f"controller type must be one of {CONTROLLER_TYPES}")
        if self.gains is None:
            self.gains = control.PidGains() if self.controller_type == "pid" else control.GeometricGains()
        expected = control.PidGains if self.controller_type == "pid" else control.GeometricGains
        if not isinstance(self.gains, expected):
            raise InvalidParameters(f"{self.controller_type} controller needs {expected.__name__}")
        self.workspace_origin = np.asarray(self.workspace_origin, dtype=float).reshape(3)
        if not self.physics_rate > 0 or 1.0 / self.physics_rate > dynamics.MAX_DT:
            raise InvalidParameters(f"physics rate must be >= {1 / dynamics.MAX_DT} Hz")
        if self.command_rate_override is not None and not 0 < self.command_rate_override <= self.physics_rate:
            raise InvalidParameters("command rate must be in (0, physics_rate]")
        if self.settle_time < 0 or self.command_latency < 0:
            raise InvalidParameters("settle time and command latency must be >= 0")
        if not self.divergence_bound > 0:
            raise InvalidParameters("divergence bound must be > 0")
        if self.condition not in CONDITIONS:
            raise InvalidParameters(f"condition must be one of {CONDITIONS}")
        if self.allocation_mode not in ("strict", "saturate"):
            raise InvalidParameters("allocation mode must be 'strict' or 'saturate'")

    def to_dict(self):
        """JSON-ready snapshot in the config-file layout."""
        out = {
            "controller": {"type": self.controller_type, self.controller_type: self.gains.to_dict()},
            "robot": self.robot.to_dict(),
            "physics_rate_hz": self.physics_rate,
            "command_rate_hz": self.command_rate_override,
            "trajectory": None if self.trajectory_source is None else str(self.trajectory_source),
            "workspace": {"origin": self.workspace_origin.tolist(), "scale": self.workspace_scale},
            "settle_s": self.settle_time,
            "divergence_bound_m": self.divergence_bound,
            "command_latency_s": self.command_latency,
            "allocation_mode": self.allocation_mode,
            "seed": self.seed,
            "label": {"subject_segment": self.subject_segment, "condition": self.condition},
        }
        if self.initial_state is not None:
            s = self.initial_state
            out["initial_state"] = {
                "position": s.position.tolist(),
                "rotation": s.rotation.reshape(-1).tolist(),
                "linear_velocity": s.linear_velocity.tolist(),
                "angular_velocity": s.angular_velocity.tolist(),
            }
        return out


_CONFIG_KEYS = {
    "controller", "robot", "robot_file", "physics_rate_hz", "command_rate_hz", "trajectory",
    "workspace", "settle_s", "divergence_bound_m", "command_latency_s", "allocation_mode",
    "seed", "label", "initial_state",
}


def config_from_dict(data, base_dir="."):
    """Build an :class:`ExperimentConfig` from parsed config-file content.

    Relative paths are resolved against ``base_dir``.
    """
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise InvalidParameters(f"unknown config keys: {sorted(unknown)}")
    base_dir = Path(base_dir)
    ctrl = data.get("controller", {})
    ctype = ctrl.get("type", "geometric")
    if ctype not in CONTROLLER_TYPES:
        raise InvalidParameters(f"controller.type must be one of {CONTROLLER_TYPES}, got {ctype!r}")
    gains_cls = control.PidGains if ctype == "pid" else control.GeometricGains
    gains = gains_cls.from_dict(ctrl.get(ctype, {}))

    if "robot_file" in data:
        robot = dynamics.load_robot_params(base_dir / data["robot_file"])
    else:
        robot = dynamics.RobotParams.from_dict(data.get("robot", {}))

    source = data.get("trajectory")
    if source is not None:
        source = str(base_dir / source)
    ws = data.get("workspace", {})
    label = data.get("label", {})

    initial = None
    if data.get("initial_state"):
        initial = dynamics.RigidBodyState(**{
            k: np.asarray(v, dtype=float) for k, v in data["initial_state"].items()
        })
        initial.validate()

    return ExperimentConfig(
        controller_type=ctype,
        gains=gains,
        robot=robot,
        physics_rate=float(data.get("physics_rate_hz", 500.0)),
        command_rate_override=data.get("command_rate_hz"),
        trajectory_source=source,
        workspace_origin=ws.get("origin", [0.0, 0.0, 1.0]),
        workspace_scale=float(ws.get("scale", 1.0)),
        initial_state=initial,
        settle_time=float(data.get("settle_s", 2.0)),
        divergence_bound=float(data.get("divergence_bound_m", 10.0)),
        command_latency=float(data.get("command_latency_s", 0.0)),
        allocation_mode=data.get("allocation_mode", "saturate"),
        seed=int(data.get("seed", 0)),
        subject_segment=label.get("subject_segment"),
        condition=label.get("condition", "sim"),
    )


def load_config(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ParseError("config file not found", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc
    config = config_from_dict(data, base_dir=path.parent)
    if config.subject_segment is None:
        config.subject_segment = path.stem
    return config


def prepare_trajectory(config):
    """Load, rate-match and place the setpoint path; returns (trajectory, label)."""
    if config.trajectory is not None:
        traj, meta = config.trajectory, {}
    elif config.trajectory_source is not None:
        traj, meta = traj_mod.load_trajectory_source(config.trajectory_source)
    else:
        raise InvalidParameters("config has no trajectory")
    if config.command_rate_override is not None:
        traj = traj_mod.resample(traj, config.command_rate_override)
    if traj.sample_rate > config.physics_rate:
        raise InvalidParameters("command rate exceeds physics rate")
    traj = traj_mod.to_workspace(traj, config.workspace_origin, config.workspace_scale)
    label = config.subject_segment
    if label is None:
        sid, seg = meta.get("subject_id", ""), meta.get("segment_id", "")
        label = f"{sid}-{seg}" if sid and seg else (
            Path(config.trajectory_source).stem if config.trajectory_source else "run")
    return traj, label


@dataclass(eq=False)
class FlightLog:
    """Per-physics-step record of one run.

    Arrays share their first dimension: ``t`` (s), ``commanded`` (x, z of the
    issued setpoint), ``actual`` (x, y, z), ``wrench`` (thrust, mx, my, mz as
    applied after allocation) and ``saturated`` flags.  ``metadata`` holds the
    config snapshot and the timing needed to pair records with setpoints;
    ``failure`` is None for a complete run.
    """

    t: np.ndarray
    commanded: np.ndarray
    actual: np.ndarray
    wrench: np.ndarray
    saturated: np.ndarray
    metadata: dict = field(default_factory=dict)
    failure: str = None

    def __len__(self):
        return len(self.t)

    @property
    def completed(self):
        return self.failure is None


def _setpoint_index(t, settle, rate, count):
    k = math.floor((t - settle) * rate + _EPS)
    return min(max(k, 0), count - 1)


def run_tracking_sim(config):
    """Fly ``config``'s trajectory and return the :class:`FlightLog`.

    Raises:
        DivergedSimulation: position norm exceeded ``divergence_bound`` or the
            state went non-finite; ``exc.log`` holds the records up to the
            failure with ``failure`` set.
    """
    traj, label = prepare_trajectory(config)
    params = config.robot
    phys = config.physics_rate
    dt = 1.0 / phys
    rate = traj.sample_rate
    count = len(traj)
    settle = config.settle_time
    n_records = math.ceil(phys * (settle + traj.duration) - _EPS)

    if config.initial_state is not None:
        state = config.initial_state.copy()
    else:
        state = dynamics.RigidBodyState(position=traj.position(0))

    is_pid = config.controller_type == "pid"
    gains = config.gains
    ctrl_state = control.ControllerState()
    setpoints = [control.Setpoint(traj.position(k)) for k in range(count)]

    t_log = np.empty(n_records)
    cmd_log = np.empty((n_records, 2))
    pos_log = np.empty((n_records, 3))
    wrench_log = np.empty((n_records, 4))
    sat_log = np.zeros(n_records, dtype=bool)

    previous = dynamics.ControlWrench(params.weight)
    failure = None
    n_done = 0
    for n in range(n_records):
        t = n * dt
        issued = _setpoint_index(t, settle, rate, count)
        seen = _setpoint_index(t - config.command_latency, settle, rate, count)
        sp = setpoints[seen]
        flagged = False
        try:
            if is_pid:
                wrench, ctrl_state = control.pid_cascade_control(state, sp, gains, ctrl_state, dt, params)
            else:
                wrench = control.geometric_control(state, sp, gains, params)
        except DegenerateThrust:
            wrench, flagged = previous, True
        previous = wrench
        rotors = dynamics.rotors_from_wrench(wrench, params, config.allocation_mode)
        applied = params.mixing @ rotors.forces

        t_log[n] = t
        cmd_log[n] = traj.points[issued]
        pos_log[n] = state.position
        wrench_log[n] = applied
        sat_log[n] = rotors.saturated or wrench.clamped or flagged
        n_done = n + 1

        try:
            state = dynamics.step(state, rotors, params, dt)
        except NonFiniteState:
            failure = f"non-finite state after t = {t:.6f} s"
            break
        if float(np.linalg.norm(state.position)) > config.divergence_bound:
            failure = f"|p| exceeded {config.divergence_bound} m after t = {t:.6f} s"
            break

    metadata = {
        "subject_segment": label,
        "condition": config.condition,
        "controller": config.controller_type,
        "physics_rate_hz": phys,
        "command_rate_hz": rate,
        "settle_s": settle,
        "n_setpoints": count,
        "n_records_expected": n_records,
        "status": "ok" if failure is None else "diverged",
        "failure": failure,
        "config": config.to_dict(),
    }
    log = FlightLog(
        t_log[:n_done].copy(),
        cmd_log[:n_done].copy(),
        pos_log[:n_done].copy(),
        wrench_log[:n_done].copy(),
        sat_log[:n_done].copy(),
        metadata,
        failure,
    )
    if failure is not None:
        raise DivergedSimulation(failure, log=log)
    return log


def comparison_indices(log):
    """Record index paired with each setpoint: the last record of its hold."""
    meta = log.metadata
    phys, rate, settle = meta["physics_rate_hz"], meta["command_rate_hz"], meta["settle_s"]
    count = int(meta["n_setpoints"])
    k = np.arange(count)
    end = np.ceil((settle + (k + 1) / rate) * phys - _EPS).astype(int) - 1
    start = np.ceil((settle + k / rate) * phys - _EPS).astype(int)
    n_total = int(meta.get("n_records_expected", len(log)))
    end = np.minimum(end, n_total - 1)
    keep = end < len(log)
    return start[keep], end[keep]


def extract_comparison_series(log):
    """Commanded and achieved (x, z) at command rate, settle-in excluded.

    Setpoint ``k`` is paired with the position recorded at the end of its
    hold interval, i.e. where the vehicle got to while that command was
    active.  Returns two ``(K, 2)`` arrays with columns x, z.
    """
    if len(log) == 0:
        raise InvalidParameters("flight log is empty")
    start, end = comparison_indices(log)
    commanded = log.commanded[start]
    actual = log.actual[end][:, [0, 2]]
    return commanded, actual


def meta_path(log_path):
    p = Path(log_path)
    return p.with_name(p.stem + ".meta.json")


def write_flight_log(log, path):
    """Write the log CSV plus its ``<stem>.meta.json`` sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for n in range(len(log)):
            writer.writerow(
                [repr(float(log.t[n]))]
                + [repr(float(v)) for v in log.commanded[n]]
                + [repr(float(v)) for v in log.actual[n]]
                + [repr(float(v)) for v in log.wrench[n]]
                + [int(bool(log.saturated[n]))]
            )
    with open(meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(log.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_flight_log(path):
    """Inverse of :func:`write_flight_log`.

    A log without sidecar is accepted when its setpoints can be recovered
    from the data: the command rate is then taken as the physics rate and no
    settle-in is assumed.
    """
    path = Path(path)
    rows = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != LOG_HEADER:
                raise ParseError(f"expected header {','.join(LOG_HEADER)}", path=path, line=1)
            for row in reader:
                if not row:
                    continue
                if len(row) != len(LOG_HEADER):
                    raise ParseError(f"expected {len(LOG_HEADER)} fields", path=path, line=reader.line_num)
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ParseError(f"bad value: {exc}", path=path, line=reader.line_num) from None
    except FileNotFoundError as exc:
        raise ParseError("log file not found", path=path) from exc
    if not rows:
        raise ParseError("log has no records", path=path)
    arr = np.array(rows)
    mp = meta_path(path)
    if mp.exists():
        try:
            with open(mp, encoding="utf-8") as fh:
                metadata = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path=mp, line=exc.lineno) from exc
    else:
        phys = 1.0 / (arr[1, 0] - arr[0, 0]) if len(arr) > 1 else 1.0
        metadata = {
            "subject_segment": path.stem,
            "condition": "sim",
            "physics_rate_hz": phys,
            "command_rate_hz": phys,
            "settle_s": 0.0,
            "n_setpoints": len(arr),
            "n_records_expected": len(arr),
            "status": "ok",
            "failure": None,
        }
    for key in ("physics_rate_hz", "command_rate_hz", "settle_s", "n_setpoints"):
        if key not in metadata:
            raise ParseError(f"metadata lacks {key!r}", path=mp)
    return FlightLog(
        arr[:, 0], arr[:, 1:3], arr[:, 3:6], arr[:, 6:10], arr[:, 10] != 0,
        metadata, metadata.get("failure"),
    )


def _batch_one(args):
    config_path, out_path = args
    try:
        log = run_tracking_sim(load_config(config_path))
        status = "ok"
    except DivergedSimulation as exc:
        log, status = exc.log, "diverged"
    write_flight_log(log, out_path)
    return status


def run_batch(config_dir, out_dir, workers=1):
    """Run every ``*.json`` config in ``config_dir``; logs go to ``out_dir``.

    Runs share nothing, so ``workers > 1`` fans them out over processes
    without changing any output.  Returns ``{config stem: status}`` sorted by
    stem.
    """
    config_dir, out_dir = Path(config_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    configs = sorted(config_dir.glob("*.json"))
    jobs = [(c, out_dir / f"{c.stem}.csv") for c in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            statuses = list(pool.map(_batch_one, jobs))
    else:
        statuses = [_batch_one(job) for job in jobs]
    return {c.stem: s for c, s in zip(configs, statuses)}
