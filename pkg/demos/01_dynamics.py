"""
Rigid-body model of the quadrotor: mixing, hover, free fall and a
torque-free tumble.

Run with ``python demos/01_dynamics.py``.
"""

import numpy as np

from kicktrack import dynamics as dyn

params = dyn.RobotParams()
print(f"mass {params.mass} kg, arm {params.arm_length} m, gamma {params.gamma:.6f} m")
print("mixing matrix (rows: thrust, Mx, My, Mz):")
print(np.array2string(params.mixing, precision=4, suppress_small=True))

# Rotor forces -> wrench -> rotor forces
forces = dyn.RotorForces([0.1, 0.2, 0.1, 0.05])
wrench = dyn.wrench_from_rotors(forces, params)
print("wrench for F = (0.1, 0.2, 0.1, 0.05):", wrench.as_vector())
print("recovered forces:", dyn.rotors_from_wrench(wrench, params, "strict").forces)

# A pure roll moment with zero thrust needs a pulling rotor
demand = dyn.ControlWrench(0.0, [0.01, 0.0, 0.0])
clamped = dyn.rotors_from_wrench(demand, params, "saturate")
print("infeasible demand clamps to", clamped.forces, "saturated:", clamped.saturated)

# Hover is an exact equilibrium
state = dyn.RigidBodyState(position=[0.0, 0.0, 1.0])
hover = dyn.RotorForces.hover(params)
for _ in range(500):
    state = dyn.step(state, hover, params, 0.002)
print("after 1 s of hover thrust:", state.position)

# Free fall for one second
state = dyn.RigidBodyState()
for _ in range(500):
    state = dyn.step(state, dyn.RotorForces(np.zeros(4)), params, 0.002)
print(f"free fall after 1 s: z = {state.position[2]:.12f} (expected {-params.gravity / 2})")

# Tumbling body: angular momentum in the inertial frame stays put
tumble = dyn.RobotParams(inertia=[1e-5, 2e-5, 3e-5])
state = dyn.RigidBodyState(angular_velocity=[1.0, 0.5, 0.2])
L0 = dyn.angular_momentum_inertial(state, tumble)
for _ in range(5000):
    state = dyn.step(state, dyn.RotorForces(np.zeros(4)), tumble, 0.002)
L = dyn.angular_momentum_inertial(state, tumble)
print(f"10 s tumble: relative momentum drift {np.linalg.norm(L - L0) / np.linalg.norm(L0):.2e}, "
      f"|R^T R - I| = {state.orthonormality_error():.2e}")
