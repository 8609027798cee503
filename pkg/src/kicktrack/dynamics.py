"""
Quadrotor rigid-body dynamics.

Newton-Euler equations for a plus-configuration quadrotor, the rotor mixing
matrix, and a fixed-step RK4 integrator that advances the attitude on the
rotation group (Munthe-Kaas style: each stage evaluates the rotation through
the exponential map, so no Euler angles are ever integrated).

Frames: inertial {s} has +z up, gravity acts along -z.  Body {b} has rotors
1-4 on the +x, +y, -x, -y arms and thrust along +z_b.
"""

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from kicktrack.errors import (
    InvalidParameters,
    NegativeRotorForce,
    NonFiniteState,
    SingularInertia,
    SingularMixing,
)

ORTHONORMALITY_TOL = 1e-9
MAX_DT = 0.01

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class RobotParams:
    """Physical constants of the vehicle (SI units).

    Defaults describe a stock Crazyflie 2.0 (27 g).  ``inertia`` may be given
    as 3 diagonal entries or a full 3x3 matrix.
    """

    mass: float = 0.027
    arm_length: float = 0.046
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([1.395e-5, 1.436e-5, 2.173e-5])
    )
    thrust_coeff: float = 2.88e-8
    moment_coeff: float = 2.88e-8 * 0.005772
    gravity: float = 9.81

    def __post_init__(self):
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        elif inertia.shape == (9,):
            inertia = inertia.reshape(3, 3)
        if inertia.shape != (3, 3):
            raise InvalidParameters(f"inertia must be 3, 9 or 3x3 entries, got shape {inertia.shape}")
        inertia.setflags(write=False)
        object.__setattr__(self, "inertia", inertia)

        for name in ("mass", "arm_length", "thrust_coeff", "moment_coeff", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameters(f"{name} must be finite and > 0, got {value!r}")
        if not np.all(np.isfinite(inertia)):
            raise InvalidParameters("inertia has non-finite entries")
        if not np.allclose(inertia, inertia.T, rtol=0, atol=1e-12 * np.abs(inertia).max()):
            raise InvalidParameters("inertia must be symmetric")
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise InvalidParameters("inertia must be positive definite")
        if not math.isfinite(self.gamma):
            raise InvalidParameters("moment_coeff / thrust_coeff is not finite")

    @property
    def gamma(self):
        """Rotor drag-moment to thrust ratio k_m / k_f."""
        return self.moment_coeff / self.thrust_coeff

    @property
    def weight(self):
        return self.mass * self.gravity

    @cached_property
    def inertia_inv(self):
        try:
            inv = np.linalg.inv(self.inertia)
        except np.linalg.LinAlgError as exc:
            raise SingularInertia(str(exc)) from exc
        inv.setflags(write=False)
        return inv

    @cached_property
    def mixing(self):
        return mixing_matrix(self.arm_length, self.gamma)

    @cached_property
    def mixing_inv(self):
        inv = np.linalg.inv(self.mixing)
        inv.setflags(write=False)
        return inv

    def to_dict(self):
        return {
            "mass_kg": self.mass,
            "arm_length_m": self.arm_length,
            "inertia_kgm2": self.inertia.reshape(-1).tolist(),
            "thrust_coeff": self.thrust_coeff,
            "moment_coeff": self.moment_coeff,
            "gravity_mps2": self.gravity,
        }

    @classmethod
    def from_dict(cls, data):
        """Build from the config-file key names; missing keys keep defaults."""
        keys = {
            "mass_kg": "mass",
            "arm_length_m": "arm_length",
            "inertia_kgm2": "inertia",
            "thrust_coeff": "thrust_coeff",
            "moment_coeff": "moment_coeff",
            "gravity_mps2": "gravity",
        }
        unknown = set(data) - set(keys)
        if unknown:
            raise InvalidParameters(f"unknown robot parameter keys: {sorted(unknown)}")
        return cls(**{keys[k]: v for k, v in data.items()})


def load_robot_params(path):
    """Read :class:`RobotParams` from a JSON file using the documented keys."""
    with open(path, encoding="utf-8") as fh:
        return RobotParams.from_dict(json.load(fh))


@dataclass(eq=False)
class RigidBodyState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=float).reshape(3)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float).reshape(3)

    def orthonormality_error(self):
        R = self.rotation
        return float(np.linalg.norm(R.T @ R - np.eye(3)))

    def validate(self, tol=ORTHONORMALITY_TOL):
        if self.orthonormality_error() > tol:
            raise InvalidParameters("rotation is not orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > tol:
            raise InvalidParameters("rotation has det != +1")

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.position))
            and np.all(np.isfinite(self.rotation))
            and np.all(np.isfinite(self.linear_velocity))
            and np.all(np.isfinite(self.angular_velocity))
        )

    def copy(self):
        return RigidBodyState(
            self.position.copy(),
            self.rotation.copy(),
            self.linear_velocity.copy(),
            self.angular_velocity.copy(),
        )


@dataclass(eq=False)
class RotorForces:
    """Per-rotor thrust magnitudes F_i = k_f * w_i**2 in newtons.

    ``saturated`` is set by :func:`rotors_from_wrench` when negative demands
    were clamped to zero.
    """

    forces: np.ndarray
    saturated: bool = False

    def __post_init__(self):
        self.forces = np.asarray(self.forces, dtype=float).reshape(4)
        if np.any(self.forces < 0):
            raise NegativeRotorForce(f"rotor forces must be >= 0, got {self.forces}")

    def rotor_speeds(self, params):
        """Rotor angular speeds in rad/s."""
        return np.sqrt(self.forces / params.thrust_coeff)

    @classmethod
    def hover(cls, params):
        return cls(np.full(4, params.weight / 4.0))


@dataclass(eq=False)
class ControlWrench:
    """Collective thrust (N) and body moments (N*m).

    ``clamped`` marks a command whose thrust demand was negative and has been
    clamped to zero by the controller that produced it.
    """

    collective_thrust: float
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    clamped: bool = False

    def __post_init__(self):
        self.collective_thrust = float(self.collective_thrust)
        self.moment = np.asarray(self.moment, dtype=float).reshape(3)
        if self.collective_thrust < 0:
            raise InvalidParameters(f"collective thrust must be >= 0, got {self.collective_thrust}")

    def as_vector(self):
        return np.array([self.collective_thrust, *self.moment])


def mixing_matrix(arm_length, gamma):
    """4x4 map from rotor forces to [thrust, Mx, My, Mz]."""
    l, g = arm_length, gamma
    B = np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [0.0, l, 0.0, -l],
            [-l, 0.0, l, 0.0],
            [g, -g, g, -g],
        ]
    )
    B.setflags(write=False)
    return B


def wrench_from_rotors(rotors, params):
    u = params.mixing @ rotors.forces
    return ControlWrench(u[0], u[1:])


def rotors_from_wrench(wrench, params, mode="saturate"):
    """Invert the mixing matrix.

    Args:
        wrench: desired thrust and body moments.
        params: robot parameters.
        mode: ``"strict"`` raises :class:`NegativeRotorForce` when any rotor
            would need to pull; ``"saturate"`` clamps those rotors to zero and
            sets ``saturated`` on the result.
    """
    if mode not in ("strict", "saturate"):
        raise ValueError(f"unknown allocation mode {mode!r}")
    return allocate(wrench.as_vector(), params, mode)


def allocate(u, params, mode="saturate"):
    """Array version of :func:`rotors_from_wrench` for a 4-vector ``u``."""
    if params.arm_length == 0 or params.gamma == 0:
        raise SingularMixing("mixing matrix is singular (l = 0 or gamma = 0)")
    forces = params.mixing_inv @ np.asarray(u, dtype=float)
    if np.any(forces < 0):
        if mode == "strict":
            raise NegativeRotorForce(f"wrench requires negative rotor force: {forces}")
        return RotorForces(np.maximum(forces, 0.0), saturated=True)
    return RotorForces(forces)


def hat(v):
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def cross(a, b):
    # np.cross is an order of magnitude slower for single 3-vectors
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def so3_exp(theta):
    """Rodrigues formula for exp(hat(theta))."""
    angle_sq = float(theta @ theta)
    K = hat(theta)
    if angle_sq < 1e-12:
        # series to O(angle^4); the truncation is below double precision here
        a = 1.0 - angle_sq / 6.0
        b = 0.5 - angle_sq / 24.0
    else:
        angle = math.sqrt(angle_sq)
        a = math.sin(angle) / angle
        b = (1.0 - math.cos(angle)) / angle_sq
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R):
    """Rotation vector of ``R`` (angle < pi)."""
    cos_angle = min(1.0, max(-1.0, (np.trace(R) - 1.0) / 2.0))
    angle = math.acos(cos_angle)
    w = vee(R - R.T)
    if angle < 1e-6:
        return 0.5 * w
    return angle / (2.0 * math.sin(angle)) * w


def _dexp_inv_right(theta, omega):
    """theta_dot such that d/dt[R0 exp(theta)] = R0 exp(theta) hat(omega)."""
    angle_sq = float(theta @ theta)
    t_x_w = cross(theta, omega)
    if angle_sq < 1e-8:
        c = 1.0 / 12.0 + angle_sq / 720.0
    else:
        angle = math.sqrt(angle_sq)
        c = 1.0 / angle_sq - (1.0 + math.cos(angle)) / (2.0 * angle * math.sin(angle))
    return omega + 0.5 * t_x_w + c * cross(theta, t_x_w)


def project_to_so3(R):
    """Nearest rotation matrix in the Frobenius norm (polar factor)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


def translational_derivative(state, collective_thrust, params):
    """Inertial acceleration p_ddot = (1/m)([0,0,-mg] + R [0,0,sum F])."""
    return _linear_accel(state.rotation, collective_thrust, params)


def _linear_accel(R, thrust, params):
    acc = R[:, 2] * (thrust / params.mass)
    acc[2] -= params.gravity
    return acc


def rotational_derivative(state, moment, params):
    """Body angular acceleration from Euler's equations."""
    return _angular_accel(state.angular_velocity, np.asarray(moment, dtype=float), params)


def _angular_accel(w, moment, params):
    I = params.inertia
    return params.inertia_inv @ (moment - cross(w, I @ w))


def step(state, rotors, params, dt):
    """Advance the state by ``dt`` with rotor forces held constant.

    Classical RK4 over (position, rotation, velocity, body rate).  The
    rotation is parametrised locally as R0 exp(theta) with theta(0) = 0, so
    every stage reads its attitude through the exponential map; the result is
    re-orthonormalised by polar projection.

    Raises:
        NonFiniteState: if any component of the new state is NaN or Inf.
    """
    if not (0 < dt <= MAX_DT):
        raise ValueError(f"dt must be in (0, {MAX_DT}], got {dt}")
    u = params.mixing @ rotors.forces
    return _rk4(state, float(u[0]), u[1:], params, dt)


def _rk4(state, thrust, moment, params, dt):
    R0 = state.rotation
    p0 = state.position
    v0 = state.linear_velocity
    w0 = state.angular_velocity

    def deriv(theta, v, w):
        R = R0 if theta is None else R0 @ so3_exp(theta)
        theta_dot = w if theta is None else _dexp_inv_right(theta, w)
        return v, theta_dot, _linear_accel(R, thrust, params), _angular_accel(w, moment, params)

    h2 = 0.5 * dt
    k1p, k1t, k1v, k1w = deriv(None, v0, w0)
    k2p, k2t, k2v, k2w = deriv(h2 * k1t, v0 + h2 * k1v, w0 + h2 * k1w)
    k3p, k3t, k3v, k3w = deriv(h2 * k2t, v0 + h2 * k2v, w0 + h2 * k2w)
    k4p, k4t, k4v, k4w = deriv(dt * k3t, v0 + dt * k3v, w0 + dt * k3w)

    h6 = dt / 6.0
    p = p0 + h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    theta = h6 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    v = v0 + h6 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    w = w0 + h6 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)

    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(p))
            and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise NonFiniteState("integration produced a non-finite state")
    if not np.any(theta):
        R = R0.copy()
    else:
        R = project_to_so3(R0 @ so3_exp(theta))
    new = RigidBodyState.__new__(RigidBodyState)
    new.position, new.rotation, new.linear_velocity, new.angular_velocity = p, R, v, w
    return new


def angular_momentum_inertial(state, params):
    return state.rotation @ (params.inertia @ state.angular_velocity)


def mechanical_energy(state, params):
    """Translational KE + rotational KE + gravitational PE (z = 0 reference)."""
    v, w = state.linear_velocity, state.angular_velocity
    return (
        0.5 * params.mass * float(v @ v)
        + 0.5 * float(w @ (params.inertia @ w))
        + params.mass * params.gravity * float(state.position[2])
    )
