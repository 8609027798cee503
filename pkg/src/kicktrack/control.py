"""
Position controllers.

Two interchangeable controllers map the vehicle state and a position
setpoint to a :class:`~kicktrack.dynamics.ControlWrench`:

* :func:`geometric_control`, a nonlinear tracking controller with the
  attitude error defined directly on SO(3);
* :func:`pid_cascade_control`, a cascaded linear PID (position PID, attitude
  P, body-rate PID) whose memory is passed in and out explicitly.

Neither controller uses velocity or acceleration feedforward and yaw is held
at the setpoint value (0 by default).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from kicktrack.dynamics import ControlWrench, cross, vee
from kicktrack.errors import DegenerateThrust, InvalidParameters

DEGENERATE_FORCE = 1e-9


def _vec3(value):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    return arr.reshape(3)


@dataclass(eq=False)
class Setpoint:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0

    def __post_init__(self):
        self.position = _vec3(self.position)
        self.velocity = _vec3(self.velocity)
        self.yaw = float(self.yaw)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))
                and math.isfinite(self.yaw)):
            raise InvalidParameters("setpoint has non-finite components")


def _check_gains(obj, positive=(), nonnegative=()):
    for name in positive:
        value = getattr(obj, name)
        if not np.all(value > 0):
            raise InvalidParameters(f"{name} must be > 0, got {value}")
    for name in nonnegative:
        value = getattr(obj, name)
        if not np.all(value >= 0):
            raise InvalidParameters(f"{name} must be >= 0, got {value}")


@dataclass(eq=False)
class GeometricGains:
    """Gains of the SO(3) tracking controller.

    Position and velocity gains are per unit mass (1/s^2 and 1/s), attitude
    gains are in N*m per unit attitude error and N*m*s.  ``max_tilt`` (rad)
    caps the horizontal acceleration demand at ``g * tan(max_tilt)``, which
    only matters for large position errors.  The defaults are tuned for the
    stock Crazyflie parameters.
    """

    k_position: np.ndarray = field(default_factory=lambda: np.array([200.0, 200.0, 400.0]))
    k_velocity: np.ndarray = field(default_factory=lambda: np.array([14.0, 14.0, 20.0]))
    k_rotation: np.ndarray = field(default_factory=lambda: np.array([0.01715, 0.01715, 0.00665]))
    k_angular_rate: np.ndarray = field(default_factory=lambda: np.array([4.9e-4, 4.9e-4, 3.8e-4]))
    max_tilt: float = 1.0

    def __post_init__(self):
        for name in ("k_position", "k_velocity", "k_rotation", "k_angular_rate"):
            setattr(self, name, _vec3(getattr(self, name)))
        _check_gains(self, positive=("k_position", "k_velocity", "k_rotation", "k_angular_rate"))
        self.max_tilt = float(self.max_tilt)
        if not 0 < self.max_tilt < math.pi / 2:
            raise InvalidParameters(f"max_tilt must be in (0, pi/2), got {self.max_tilt}")

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_dict(self):
        out = {name: getattr(self, name).tolist()
               for name in ("k_position", "k_velocity", "k_rotation", "k_angular_rate")}
        out["max_tilt"] = self.max_tilt
        return out


@dataclass(eq=False)
class PidGains:
    """Cascaded PID gains.

    Position gains produce acceleration (m/s^2 per m, per m*s, per m/s),
    attitude gains produce body rates (1/s), rate gains produce moments
    (N*m*s and so on).  ``integrator_limit`` bounds both integrators and
    ``max_tilt`` (rad) bounds the roll/pitch targets handed to the attitude
    loop.
    """

    position_kp: np.ndarray = field(default_factory=lambda: np.array([150.0, 150.0, 150.0]))
    position_ki: np.ndarray = field(default_factory=lambda: np.array([6.0, 6.0, 6.0]))
    position_kd: np.ndarray = field(default_factory=lambda: np.array([12.0, 12.0, 12.0]))
    attitude_kp: np.ndarray = field(default_factory=lambda: np.array([40.0, 40.0, 20.0]))
    rate_kp: np.ndarray = field(default_factory=lambda: np.array([1.0e-3, 1.0e-3, 5.0e-4]))
    rate_ki: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0]))
    rate_kd: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0]))
    integrator_limit: np.ndarray = field(default_factory=lambda: np.array([0.05, 0.05, 0.05]))
    max_tilt: float = 0.6

    _fields = ("position_kp", "position_ki", "position_kd", "attitude_kp",
               "rate_kp", "rate_ki", "rate_kd", "integrator_limit")

    def __post_init__(self):
        for name in self._fields:
            setattr(self, name, _vec3(getattr(self, name)))
        _check_gains(
            self,
            positive=("position_kp", "attitude_kp", "rate_kp", "integrator_limit"),
            nonnegative=("position_ki", "position_kd", "rate_ki", "rate_kd"),
        )
        self.max_tilt = float(self.max_tilt)
        if not 0 < self.max_tilt < math.pi / 2:
            raise InvalidParameters(f"max_tilt must be in (0, pi/2), got {self.max_tilt}")

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_dict(self):
        out = {name: getattr(self, name).tolist() for name in self._fields}
        out["max_tilt"] = self.max_tilt
        return out


@dataclass(frozen=True, eq=False)
class ControllerState:
    """Discrete PID memory threaded through :func:`pid_cascade_control`.

    Integrators hold the already gain-weighted integral (units of the loop
    output), which is what the anti-windup clamp bounds.  ``initialized`` is
    False until the first call, so the first derivative term is zero.
    """

    position_integrator: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rate_integrator: np.ndarray = field(default_factory=lambda: np.zeros(3))
    previous_error: np.ndarray = field(default_factory=lambda: np.zeros(3))
    previous_rate_error: np.ndarray = field(default_factory=lambda: np.zeros(3))
    initialized: bool = False


def attitude_error(R, R_d):
    """0.5 * vee(R_d^T R - R^T R_d)."""
    return 0.5 * vee(R_d.T @ R - R.T @ R_d)


def desired_rotation(b3_d, yaw):
    """Rotation whose third column is ``b3_d`` and whose heading follows ``yaw``."""
    b1_c = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    b2_d = cross(b3_d, b1_c)
    n = math.sqrt(float(b2_d @ b2_d))
    if n < 1e-9:
        # thrust axis parallel to the heading: fall back to the body y axis
        b2_d = np.array([-math.sin(yaw), math.cos(yaw), 0.0])
        b2_d = b2_d - (b2_d @ b3_d) * b3_d
        n = math.sqrt(float(b2_d @ b2_d))
    b2_d = b2_d / n
    b1_d = cross(b2_d, b3_d)
    return np.column_stack((b1_d, b2_d, b3_d))


def geometric_control(state, setpoint, gains, params):
    """Nonlinear SO(3) position controller.

    Raises:
        DegenerateThrust: the desired force vector has (numerically) zero
            norm, so no thrust direction can be defined.  Callers are expected
            to hold the previous command for that sample.
    """
    m, g = params.mass, params.gravity
    e_p = state.position - setpoint.position
    e_v = state.linear_velocity - setpoint.velocity

    acc = -gains.k_position * e_p - gains.k_velocity * e_v
    horizontal = math.hypot(acc[0], acc[1])
    limit = g * math.tan(gains.max_tilt)
    if horizontal > limit:
        acc[:2] *= limit / horizontal
    f_d = m * acc
    f_d[2] += m * g
    f_norm = math.sqrt(float(f_d @ f_d))
    if f_norm < DEGENERATE_FORCE:
        raise DegenerateThrust(f"desired force norm {f_norm:.3e} N")

    R = state.rotation
    thrust = float(f_d @ R[:, 2])
    clamped = thrust < 0.0
    if clamped:
        thrust = 0.0

    R_d = desired_rotation(f_d / f_norm, setpoint.yaw)
    e_R = attitude_error(R, R_d)
    e_w = state.angular_velocity  # desired body rate is zero
    moment = -gains.k_rotation * e_R - gains.k_angular_rate * e_w
    return ControlWrench(thrust, moment, clamped=clamped)


def euler_zyx(R):
    """(roll, pitch, yaw) of ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
    roll = math.atan2(R[2, 1], R[2, 2])
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def _wrap(angle):
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def pid_cascade_control(state, setpoint, gains, ctrl_state, dt, params):
    """One tick of the cascaded PID.

    Position PID gives a desired acceleration.  Its horizontal part sets the
    desired roll/pitch through the small-angle map about the setpoint yaw and
    its vertical part sets the thrust.  A proportional attitude loop turns
    the attitude error into body-rate targets and a rate PID turns those into
    moments.

    Returns:
        ``(wrench, new_ctrl_state)``; ``ctrl_state`` itself is not modified.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    m, g = params.mass, params.gravity
    limit = gains.integrator_limit

    # outer loop: position
    err = setpoint.position - state.position
    pos_int = np.clip(ctrl_state.position_integrator + gains.position_ki * err * dt, -limit, limit)
    if ctrl_state.initialized:
        d_err = (err - ctrl_state.previous_error) / dt
    else:
        d_err = np.zeros(3)
    acc = gains.position_kp * err + pos_int + gains.position_kd * d_err

    yaw_d = setpoint.yaw
    cy, sy = math.cos(yaw_d), math.sin(yaw_d)
    tilt_max = gains.max_tilt
    pitch_d = min(tilt_max, max(-tilt_max, (acc[0] * cy + acc[1] * sy) / g))
    roll_d = min(tilt_max, max(-tilt_max, (acc[0] * sy - acc[1] * cy) / g))

    R = state.rotation
    tilt = R[2, 2]
    thrust = m * (g + acc[2]) / tilt if tilt > 0.1 else m * (g + acc[2])
    clamped = thrust < 0.0
    if clamped:
        thrust = 0.0

    # middle loop: attitude -> body rates
    att = euler_zyx(R)
    att_err = np.array([roll_d - att[0], pitch_d - att[1], _wrap(yaw_d - att[2])])
    rate_d = gains.attitude_kp * att_err

    # inner loop: body rates -> moments
    rate_err = rate_d - state.angular_velocity
    rate_int = np.clip(ctrl_state.rate_integrator + gains.rate_ki * rate_err * dt, -limit, limit)
    if ctrl_state.initialized:
        d_rate_err = (rate_err - ctrl_state.previous_rate_error) / dt
    else:
        d_rate_err = np.zeros(3)
    moment = gains.rate_kp * rate_err + rate_int + gains.rate_kd * d_rate_err

    new_state = replace(
        ctrl_state,
        position_integrator=pos_int,
        rate_integrator=rate_int,
        previous_error=err,
        previous_rate_error=rate_err,
        initialized=True,
    )
    return ControlWrench(thrust, moment, clamped=clamped), new_state
