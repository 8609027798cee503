"""
The two position controllers on a 0.5 m step in x.

Both start hovering half a meter behind the target.  The geometric
controller works on SO(3) directly; the cascaded PID goes through Euler
angles and a body-rate loop.

Run with ``python demos/02_controllers.py``.
"""

import numpy as np

from kicktrack import dynamics as dyn
from kicktrack import simharness as sh
from kicktrack import trajectory as tr

target = tr.Trajectory(0.2, [[0.0, 0.0]])  # a single setpoint held for 5 s

for controller in ("geometric", "pid"):
    config = sh.ExperimentConfig(
        controller_type=controller,
        trajectory=target,
        settle_time=0.0,
        initial_state=dyn.RigidBodyState(position=[-0.5, 0.0, 1.0]),
    )
    log = sh.run_tracking_sim(config)
    err = np.linalg.norm(log.actual - [0.0, 0.0, 1.0], axis=1)
    within = np.nonzero(err > 1e-3)[0]
    settle = log.t[within[-1] + 1] if len(within) < len(err) else float("nan")
    overshoot = max(0.0, log.actual[:, 0].max())
    print(f"{controller:>9}: within 1 mm after {settle:.2f} s, overshoot {overshoot * 1e3:.1f} mm, "
          f"error at 5 s {err[-1]:.1e} m, saturated on {log.saturated.mean():.1%} of steps")

    for t_mark in (0.25, 0.5, 1.0, 2.0):
        n = int(round(t_mark * config.physics_rate))
        print(f"           t = {t_mark:4.2f} s  x = {log.actual[n, 0]:+.4f} m")
