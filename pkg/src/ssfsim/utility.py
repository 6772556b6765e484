"""Last-encounter timers and the utility they induce.

Row ``x`` of :class:`EncounterTimers` is node x's table; entry ``y`` holds the
slot at which x last heard a beacon from y, or ``NEVER``.
"""

from __future__ import annotations

import math

import numpy as np

NEVER = -1
NEVER_MET = -math.inf


class EncounterTimers:
    def __init__(self, n: int):
        self.last = np.full((n, n), NEVER, dtype=np.int64)

    def table(self, x: int) -> np.ndarray:
        return self.last[x]

    def record(self, a: int, b: int, slot: int) -> None:
        record_encounter(self.last[a], self.last[b], a, b, slot)

    def record_graph(self, adj: np.ndarray, slot: int) -> None:
        """Beacon round: every in-range pair meets at ``slot``."""
        self.last[adj] = slot

    def utility(self, x: int, destination: int, current_slot: int) -> float:
        return utility(self.last[x], destination, current_slot)


def record_encounter(table_a, table_b, a: int, b: int, slot: int):
    table_a[b] = slot
    table_b[a] = slot
    return table_a, table_b


def utility(table, destination: int, current_slot: int) -> float:
    """Utility of a table's owner for ``destination``: its last-encounter slot."""
    last = int(table[destination])
    if last == NEVER:
        return NEVER_MET
    if last > current_slot:
        raise ValueError(f"timer {last} lies in the future of slot {current_slot}")
    return float(last)


def focus_decision(u_a: float, u_b: float) -> bool:
    return u_b > u_a
