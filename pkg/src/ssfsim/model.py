"""Shared domain vocabulary: configuration, messages, copies and node snapshots."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional


class Protocol(str, enum.Enum):
    NORMAL = "normal"
    DIRECT = "direct"
    SPRAY_WAIT = "spray_wait"
    BINARY_SW = "binary_sw"
    SEEK_FOCUS = "seek_focus"
    SSF = "ssf"


class Phase(str, enum.Enum):
    SPRAY = "spray"
    SELECT = "select"
    FOCUS = "focus"
    WAIT = "wait"


PAPER_NODE_COUNTS = (25, 50, 75, 100)
PAPER_PACKET_SIZES = (5, 10, 15, 20, 25)


@dataclass(frozen=True)
class SimTime:
    slot: int
    slot_duration: float = 1.0

    @property
    def seconds(self) -> float:
        return self.slot * self.slot_duration


@dataclass(frozen=True)
class Message:
    msg_id: int
    source: int
    destination: int
    packet_size: int
    created_at: SimTime
    copy_budget_L: int = 1

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError(f"message {self.msg_id}: source equals destination")
        if self.copy_budget_L < 1:
            raise ValueError(f"message {self.msg_id}: copy budget must be >= 1")
        if self.packet_size < 1:
            raise ValueError(f"message {self.msg_id}: packet size must be positive")


@dataclass(slots=True)
class MessageCopy:
    """One lineage of a message held by one carrier.

    ``path`` is the ordered carrier history (source first, holder last) and
    ``visited`` is its set view; the two are kept in step by :meth:`moved_to`.
    """

    msg_id: int
    holder: int
    n_copies: int
    phase: Phase
    visited: set = field(default_factory=set)
    path: list = field(default_factory=list)
    planned_route: Optional[tuple] = None
    stuck: bool = False

    def __post_init__(self):
        if not self.path:
            self.path = [self.holder]
        if not self.visited:
            self.visited = set(self.path)

    def moved_to(self, receiver: int, n: int, phase: Phase, route=None) -> "MessageCopy":
        return MessageCopy(
            msg_id=self.msg_id,
            holder=receiver,
            n_copies=n,
            phase=phase,
            visited=self.visited | {receiver},
            path=self.path + [receiver],
            planned_route=None if route is None else tuple(route),
        )

    def check(self, no_revisit: bool = False) -> list[str]:
        """Invariant violations; ``no_revisit`` adds the never-twice carrier rule."""
        problems = []
        if self.holder not in self.visited:
            problems.append("holder not in visited")
        if self.n_copies < 1:
            problems.append("n_copies < 1")
        if no_revisit and len(self.path) != len(set(self.path)):
            problems.append("repeated carrier in path")
        if set(self.path) != self.visited:
            problems.append("path and visited disagree")
        if self.planned_route is not None and self.planned_route[0] != self.holder:
            problems.append("planned route does not start at holder")
        return problems


@dataclass(frozen=True)
class NodeState:
    id: int
    position: tuple
    waypoint: tuple
    speed: float
    failed: bool
    copies: tuple
    timers: tuple


@dataclass(frozen=True)
class SimConfig:
    num_nodes: int = 50
    area: tuple = (1000.0, 1000.0)
    tx_range: float = 100.0
    slot_duration: float = 1.0
    max_slots: int = 5000
    v_min: float = 0.5
    v_max: float = 2.0
    copy_budget_L: int = 4
    packet_size: int = 10
    protocol: Protocol = Protocol.SSF
    contention_enabled: bool = True
    failures: tuple = ()
    traffic: tuple = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "area", tuple(float(a) for a in self.area))
        object.__setattr__(self, "failures", tuple(tuple(f) for f in self.failures))
        object.__setattr__(self, "traffic", tuple(tuple(t) for t in self.traffic))

    def replace(self, **changes) -> "SimConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def budget_for(self) -> int:
        """Copy budget a new message starts with under the configured protocol."""
        if self.protocol in (Protocol.SPRAY_WAIT, Protocol.BINARY_SW, Protocol.SSF):
            return self.copy_budget_L
        return 1


def validate_config(config: SimConfig) -> list[str]:
    out = []
    n = config.num_nodes
    if not isinstance(n, int) or n < 1:
        out.append("num_nodes: must be a positive integer")
        n = 0
    w, h = config.area
    if not (w > 0 and h > 0):
        out.append("area: width and height must be positive")
    if not config.tx_range > 0:
        out.append("tx_range: must be positive")
    if not config.slot_duration > 0:
        out.append("slot_duration: must be positive")
    if config.max_slots < 0:
        out.append("max_slots: must be non-negative")
    if config.v_min < 0:
        out.append("v_min: must be non-negative")
    if config.v_max < config.v_min:
        out.append("v_max: must be >= v_min")
    if config.copy_budget_L < 1:
        out.append("copy_budget_L: must be >= 1")
    if config.packet_size < 1:
        out.append("packet_size: must be positive")
    if not 0 <= config.seed < 2**64:
        out.append("seed: must fit in 64 unsigned bits")
    for i, f in enumerate(config.failures):
        if len(f) != 2:
            out.append(f"failures[{i}]: expected (node, slot)")
            continue
        node, slot = f
        if not 0 <= node < n:
            out.append(f"failures[{i}]: node id out of range")
        if slot < 0:
            out.append(f"failures[{i}]: negative fail slot")
    for i, t in enumerate(config.traffic):
        if len(t) != 3:
            out.append(f"traffic[{i}]: expected (source, destination, slot)")
            continue
        src, dst, slot = t
        if not (0 <= src < n and 0 <= dst < n):
            out.append(f"traffic[{i}]: node id out of range")
        if src == dst:
            out.append(f"traffic[{i}]: source equals destination")
        if slot < 0:
            out.append(f"traffic[{i}]: negative creation slot")
    return out


class ConfigError(ValueError):
    """Raised when a configuration cannot be run; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
