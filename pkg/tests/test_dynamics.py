import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kicktrack import dynamics as dyn
from kicktrack.errors import InvalidParameters, NegativeRotorForce, NonFiniteState

P = dyn.RobotParams()
TUMBLE = dyn.RobotParams(inertia=[1e-5, 2e-5, 3e-5])
ZERO = dyn.RotorForces(np.zeros(4))


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def random_rotation(rng):
    return dyn.so3_exp(rng.normal(size=3))


def run(state, rotors, params, dt, n):
    for _ in range(n):
        state = dyn.step(state, rotors, params, dt)
    return state


def test_params_defaults_and_validation():
    assert P.mass == 0.027
    assert P.gamma == pytest.approx(0.005772, rel=1e-12)
    with pytest.raises(InvalidParameters):
        dyn.RobotParams(mass=0.0)
    with pytest.raises(InvalidParameters):
        dyn.RobotParams(arm_length=-1.0)
    with pytest.raises(InvalidParameters):
        dyn.RobotParams(inertia=[1e-5, -1e-5, 1e-5])
    with pytest.raises(InvalidParameters):
        dyn.RobotParams(inertia=[[1, 2, 0], [0, 1, 0], [0, 0, 1]])


def test_params_dict_round_trip(tmp_path):
    path = tmp_path / "robot.json"
    path.write_text(json.dumps(P.to_dict()))
    loaded = dyn.load_robot_params(path)
    assert loaded.to_dict() == P.to_dict()
    with pytest.raises(InvalidParameters):
        dyn.RobotParams.from_dict({"mass": 1.0})


def test_mixing_matrix_hand_expanded():
    l, g = 0.046, 0.005772
    F = np.array([0.1, 0.2, 0.1, 0.05])
    u = dyn.mixing_matrix(l, g) @ F
    expected = [
        F[0] + F[1] + F[2] + F[3],
        l * (F[1] - F[3]),
        l * (F[2] - F[0]),
        g * (F[0] - F[1] + F[2] - F[3]),
    ]
    np.testing.assert_allclose(u, expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(u, [0.45, 0.0069, 0.0, -0.05 * g], rtol=0, atol=1e-15)


def test_mixing_trivial_cases():
    h = 0.07
    w = dyn.wrench_from_rotors(dyn.RotorForces(np.full(4, h)), P)
    np.testing.assert_allclose(w.as_vector(), [4 * h, 0, 0, 0], atol=1e-16)
    assert dyn.wrench_from_rotors(ZERO, P).as_vector().tolist() == [0, 0, 0, 0]
    r = dyn.rotors_from_wrench(dyn.ControlWrench(4 * h), P, "strict")
    np.testing.assert_allclose(r.forces, np.full(4, h), rtol=1e-14)


def test_mixing_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        F = rng.uniform(0, 0.2, 4)
        u = dyn.wrench_from_rotors(dyn.RotorForces(F), P)
        back = dyn.rotors_from_wrench(u, P, "strict")
        np.testing.assert_allclose(back.forces, F, rtol=0, atol=1e-12)
        u2 = dyn.wrench_from_rotors(back, P)
        np.testing.assert_allclose(u2.as_vector(), u.as_vector(), rtol=0, atol=1e-12)


def test_strict_mode_rejects_infeasible_wrench():
    # F2 - F4 = 0.01/l with F2 + F4 = 0 forces F4 = -0.01/(2l)
    u = dyn.ControlWrench(0.0, [0.01, 0.0, 0.0])
    F = np.linalg.solve(dyn.mixing_matrix(0.046, 0.005772), u.as_vector())
    assert F[3] == pytest.approx(-0.01 / (2 * 0.046))
    with pytest.raises(NegativeRotorForce):
        dyn.rotors_from_wrench(u, P, "strict")
    sat = dyn.rotors_from_wrench(u, P, "saturate")
    assert sat.saturated and np.all(sat.forces >= 0)


def test_translational_derivative_examples():
    hover = dyn.RigidBodyState()
    np.testing.assert_allclose(dyn.translational_derivative(hover, P.weight, P), 0, atol=1e-14)
    rng = np.random.default_rng(1)
    tilted = dyn.RigidBodyState(rotation=random_rotation(rng))
    np.testing.assert_allclose(dyn.translational_derivative(tilted, 0.0, P), [0, 0, -P.gravity])


def test_ninety_degree_roll_acceleration():
    R = rot_x(np.pi / 2)
    state = dyn.RigidBodyState(rotation=R)
    expected = (R @ np.array([0.0, 0.0, P.weight]) + np.array([0.0, 0.0, -P.weight])) / P.mass
    acc = dyn.translational_derivative(state, P.weight, P)
    np.testing.assert_allclose(acc, expected, atol=1e-12)
    # thrust axis ends up along -y for a positive roll about x
    np.testing.assert_allclose(acc, [0.0, -P.gravity, -P.gravity], atol=1e-12)


def test_rotational_derivative_examples():
    rest = dyn.RigidBodyState()
    assert np.all(dyn.rotational_derivative(rest, np.zeros(3), P) == 0)
    spin = dyn.RigidBodyState(angular_velocity=[0.0, 0.0, 7.0])
    np.testing.assert_allclose(dyn.rotational_derivative(spin, np.zeros(3), P), 0, atol=1e-12)

    state = dyn.RigidBodyState(angular_velocity=[1.0, 1.0, 1.0])
    w = state.angular_velocity
    Iw = TUMBLE.inertia @ w
    gyro = np.array([w[1] * Iw[2] - w[2] * Iw[1], w[2] * Iw[0] - w[0] * Iw[2], w[0] * Iw[1] - w[1] * Iw[0]])
    oracle = -gyro / np.diag(TUMBLE.inertia)
    got = dyn.rotational_derivative(state, np.zeros(3), TUMBLE)
    np.testing.assert_allclose(got, oracle, rtol=1e-12)
    np.testing.assert_allclose(got, [-1.0, 1.0, -1.0 / 3.0], rtol=1e-12)


def test_hover_is_fixed_point():
    rotors = dyn.RotorForces.hover(P)
    state = dyn.RigidBodyState(position=[0.3, -1.2, 1.0])
    nxt = dyn.step(state, rotors, P, 0.002)
    for a, b in [(nxt.position, state.position), (nxt.rotation, state.rotation),
                 (nxt.linear_velocity, state.linear_velocity), (nxt.angular_velocity, state.angular_velocity)]:
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_free_fall_one_second():
    s = run(dyn.RigidBodyState(), ZERO, P, 0.002, 500)
    assert s.position[2] == pytest.approx(-P.gravity / 2, abs=1e-12)
    assert s.linear_velocity[2] == pytest.approx(-P.gravity, abs=1e-12)


def test_torque_free_angular_momentum_conserved():
    s = dyn.RigidBodyState(angular_velocity=[1.0, 0.5, 0.2])
    L0 = dyn.angular_momentum_inertial(s, TUMBLE)
    dt = 0.002
    for n in range(5000):
        s = dyn.step(s, ZERO, TUMBLE, dt)
        if n % 500 == 499:
            L = dyn.angular_momentum_inertial(s, TUMBLE)
            assert np.linalg.norm(L - L0) / np.linalg.norm(L0) < 1e-6


def test_thrust_free_energy_conserved():
    s = dyn.RigidBodyState(position=[0, 0, 10.0], linear_velocity=[1.0, 0.0, 2.0],
                           angular_velocity=[1.0, 0.5, 0.2])
    E0 = dyn.mechanical_energy(s, TUMBLE)
    rot0 = 0.5 * s.angular_velocity @ TUMBLE.inertia @ s.angular_velocity
    s = run(s, ZERO, TUMBLE, 0.002, 5000)
    assert abs(dyn.mechanical_energy(s, TUMBLE) - E0) / abs(E0) < 1e-6
    rot = 0.5 * s.angular_velocity @ TUMBLE.inertia @ s.angular_velocity
    assert abs(rot - rot0) / rot0 < 1e-6


def test_orthonormality_after_100k_steps():
    rng = np.random.default_rng(7)
    h = P.weight / 4
    inputs = [dyn.RotorForces(h * (1 + 0.1 * rng.uniform(-1, 1, 4))) for _ in range(1000)]
    s = dyn.RigidBodyState(angular_velocity=[0.3, -0.2, 0.5])
    for n in range(100_000):
        s = dyn.step(s, inputs[n % 1000], P, 0.002)
    assert s.orthonormality_error() < 1e-9
    assert np.linalg.det(s.rotation) == pytest.approx(1.0, abs=1e-9)


def _flat(s):
    return np.concatenate([s.position, s.rotation.ravel(), s.linear_velocity, s.angular_velocity])


def test_integrator_is_fourth_order():
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(10):
        s = dyn.RigidBodyState(
            position=rng.normal(size=3),
            rotation=random_rotation(rng),
            linear_velocity=rng.normal(size=3),
            angular_velocity=rng.uniform(-20, 20, 3),
        )
        rotors = dyn.RotorForces(rng.uniform(0.03, 0.1, 4))
        errs = []
        for dt in (0.01, 0.005):
            ref = run(s, rotors, P, dt / 100, 100)
            errs.append(np.linalg.norm(_flat(dyn.step(s, rotors, P, dt)) - _flat(ref)))
        ratios.append(errs[0] / errs[1])
    assert min(ratios) >= 12


def test_step_guards():
    s = dyn.RigidBodyState()
    with pytest.raises(ValueError):
        dyn.step(s, ZERO, P, 0.02)
    with pytest.raises(ValueError):
        dyn.step(s, ZERO, P, 0.0)
    bad = dyn.RigidBodyState(linear_velocity=[np.inf, 0, 0])
    with pytest.raises(NonFiniteState):
        dyn.step(bad, ZERO, P, 0.001)


def test_negative_rotor_force_rejected():
    with pytest.raises(NegativeRotorForce):
        dyn.RotorForces([0.1, -0.01, 0.1, 0.1])


def test_rotor_speeds():
    speeds = dyn.RotorForces.hover(P).rotor_speeds(P)
    np.testing.assert_allclose(P.thrust_coeff * speeds**2, P.weight / 4, rtol=1e-12)


vectors = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).map(np.array)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_exp_is_rotation_and_log_inverts(theta):
    R = dyn.so3_exp(theta)
    assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    if np.linalg.norm(theta) < 3.0:
        np.testing.assert_allclose(dyn.so3_log(R), theta, atol=1e-7)


@settings(max_examples=200, deadline=None)
@given(vectors, vectors)
def test_hat_vee_and_cross(a, b):
    np.testing.assert_array_equal(dyn.vee(dyn.hat(a)), a)
    np.testing.assert_allclose(dyn.cross(a, b), np.cross(a, b), atol=1e-12)
    np.testing.assert_allclose(dyn.hat(a) @ b, np.cross(a, b), atol=1e-12)


def test_projection_returns_nearest_rotation():
    rng = np.random.default_rng(2)
    R = random_rotation(rng)
    noisy = R + 1e-6 * rng.normal(size=(3, 3))
    Q = dyn.project_to_so3(noisy)
    assert np.linalg.norm(Q.T @ Q - np.eye(3)) < 1e-14
    assert np.linalg.norm(Q - R) < 1e-5
