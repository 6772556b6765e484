"""Random-waypoint mobility inside a closed rectangle.

Waypoints are drawn inside the area and legs are straight lines, so positions
never leave the rectangle and no boundary reflection is ever triggered. Pause
time at a waypoint is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .model import SimConfig


@dataclass
class MobilityState:
    position: np.ndarray  # (N, 2)
    waypoint: np.ndarray  # (N, 2)
    speed: np.ndarray  # (N,)
    area: tuple
    v_min: float
    v_max: float
    rngs: list

    @property
    def n(self) -> int:
        return len(self.speed)

    def copy(self) -> "MobilityState":
        # Generators are stateful; the copy gets independent clones.
        clones = []
        for g in self.rngs:
            c = np.random.default_rng()
            c.bit_generator.state = g.bit_generator.state
            clones.append(c)
        return MobilityState(
            self.position.copy(), self.waypoint.copy(), self.speed.copy(),
            self.area, self.v_min, self.v_max, clones,
        )

    def _draw_leg(self, i: int) -> None:
        g = self.rngs[i]
        w, h = self.area
        self.waypoint[i, 0] = g.uniform(0.0, w)
        self.waypoint[i, 1] = g.uniform(0.0, h)
        self.speed[i] = g.uniform(self.v_min, self.v_max)


def init_positions(config: SimConfig, rngs=None) -> MobilityState:
    """Place every node uniformly at random with a uniform first waypoint and speed."""
    n = config.num_nodes
    if rngs is None:
        rngs = rngmod.node_streams(config.seed, rngmod.MOBILITY, n)
    w, h = config.area
    pos = np.empty((n, 2))
    for i, g in enumerate(rngs):
        pos[i, 0] = g.uniform(0.0, w)
        pos[i, 1] = g.uniform(0.0, h)
    state = MobilityState(pos, np.empty((n, 2)), np.empty(n), (w, h),
                          config.v_min, config.v_max, rngs)
    for i in range(n):
        state._draw_leg(i)
    return state


def step_mobility(state: MobilityState, dt: float, failed=None) -> MobilityState:
    """Advance every live node by one slot of length ``dt`` (in place).

    A node covers ``min(speed * dt, distance left)``; on reaching its waypoint it
    draws a fresh waypoint and speed. Nodes flagged in ``failed`` stay frozen.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = state.waypoint - state.position
    dist = np.hypot(delta[:, 0], delta[:, 1])
    reach = state.speed * dt
    live = np.ones(state.n, dtype=bool) if failed is None else ~np.asarray(failed, dtype=bool)
    arrive = live & (dist <= reach)
    moving = live & ~arrive
    if moving.any():
        frac = reach[moving] / dist[moving]
        state.position[moving] += delta[moving] * frac[:, None]
    if arrive.any():
        idx = np.flatnonzero(arrive)
        state.position[idx] = state.waypoint[idx]
        for i in idx:
            state._draw_leg(int(i))
    # guards against rounding past the edge
    np.maximum(state.position, 0.0, out=state.position)
    np.minimum(state.position, state.area, out=state.position)
    return state
