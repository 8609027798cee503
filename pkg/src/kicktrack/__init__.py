"""Quadrotor replay of digitized infant kicking trajectories.

Modules:
    dynamics    rigid-body model, rotor mixing, RK4 integrator
    control     geometric (SO(3)) and cascaded PID position controllers
    trajectory  track loading, calibration, resampling, workspace mapping
    simharness  closed-loop runs and flight logs
    metrics     MSE and dynamic time warping
    report      evaluation rows and result tables
"""

from kicktrack.control import (
    ControllerState,
    GeometricGains,
    PidGains,
    Setpoint,
    geometric_control,
    pid_cascade_control,
)
from kicktrack.dynamics import (
    ControlWrench,
    RigidBodyState,
    RobotParams,
    RotorForces,
    rotors_from_wrench,
    step,
    wrench_from_rotors,
)
from kicktrack.metrics import DtwResult, Series, dtw, mse
from kicktrack.simharness import ExperimentConfig, FlightLog, extract_comparison_series, run_tracking_sim
from kicktrack.trajectory import Calibration, RawTrack, Trajectory, calibrate, load_track, resample, to_workspace

__version__ = "0.1.0"
