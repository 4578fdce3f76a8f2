"""Shared test setup: compile the sweep kernel once up front.

The first sweep call triggers jit compilation (a few seconds, then disk
cached); doing it here keeps individual test timings meaningful.
"""

import numpy as np
import pytest


@pytest.fixture(scope="session", autouse=True)
def _warm_sweep_kernel():
    from lzsm import AxisSpec, ModelParams, Observable, SweepSpec, run_sweep

    spec = SweepSpec(
        axis_x=AxisSpec("eps0", -0.5, 0.5, 2),
        axis_y=AxisSpec("delta", 0.5, 1.0, 2),
        fixed=ModelParams(delta1=1.0, delta2=1.0, c=0.0, amp=1.0, omega=1.0),
        observable=Observable.PROJ_POP_A,
        horizon=0.5, stroboscopic=False)
    grid = run_sweep(spec)
    assert np.all(np.isfinite(grid.values))
