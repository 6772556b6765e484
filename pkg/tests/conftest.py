import sys

import numpy as np
import pytest

from ssfsim import rng as rngmod
from ssfsim.mobility import MobilityState


def scripted_mobility(positions, area=(1000.0, 1000.0), speeds=None, waypoints=None, seed=0):
    """Mobility with chosen positions; nodes without a speed stand still.

    A parked node gets a waypoint away from itself and speed 0, so it never
    "arrives" and never draws a new leg. A moving node that reaches its
    waypoint redraws with v_min = v_max = 0 and stops there.
    """
    pos = np.array(positions, dtype=float)
    n = len(pos)
    centre = np.array(area, dtype=float) / 2
    wp = np.empty_like(pos)
    for i in range(n):
        wp[i] = centre if not np.allclose(pos[i], centre) else (0.0, 0.0)
    spd = np.zeros(n)
    if waypoints:
        for i, w in waypoints.items():
            wp[i] = w
    if speeds:
        for i, v in speeds.items():
            spd[i] = v
    return MobilityState(pos, wp, spd, tuple(area), 0.0, 0.0,
                         rngmod.node_streams(seed, rngmod.MOBILITY, n))


@pytest.fixture
def line_positions():
    # 0 - 1 - 2 - 3 - 4 spaced 80 m apart, range 100: a static path
    return [(100.0 + 80.0 * i, 500.0) for i in range(5)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(verdicts, key=lambda c: int(c[1:])):
        terminalreporter.write_line(verdicts[cid])
