"""Coverage graph, per-slot medium arbitration and dead-end failures.

Contention model (only when enabled), applied in this order:

a. one transmission per sender per slot; extra requests are deferred, the
   kept one is the lowest (msg_id, receiver);
b. half duplex: a request whose receiver is itself transmitting is deferred;
c. receiver-side collision: when two or more transmitting nodes are in range
   of a receiver, every transmission addressed to it collides.

Beacons are treated as collision-free control traffic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class PayloadKind(str, enum.Enum):
    COPY_HANDOFF = "handoff"
    DELIVERY = "delivery"
    BEACON = "beacon"


class Outcome(str, enum.Enum):
    DELIVERED = "delivered"
    COLLIDED = "collided"
    DEFERRED = "deferred"


@dataclass(frozen=True)
class TransmissionRequest:
    sender: int
    receiver: int
    msg_id: int
    payload_kind: PayloadKind = PayloadKind.COPY_HANDOFF

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError("sender equals receiver")


@dataclass(frozen=True)
class TransmissionEvent:
    request: TransmissionRequest
    outcome: Outcome
    slot: int


class ConnectivityGraph:
    """Undirected coverage graph backed by a boolean adjacency matrix."""

    __slots__ = ("adj", "_nbrs")

    def __init__(self, adj: np.ndarray):
        self.adj = adj
        self._nbrs = {}

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, failed=()) -> "ConnectivityGraph":
        adj = np.zeros((n, n), dtype=bool)
        for a, b in edges:
            if a != b:
                adj[a, b] = adj[b, a] = True
        for f in failed:
            adj[f, :] = False
            adj[:, f] = False
        return cls(adj)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def neighbors(self, i: int) -> tuple:
        nb = self._nbrs.get(i)
        if nb is None:
            nb = tuple(self.adj[i].nonzero()[0].tolist())
            self._nbrs[i] = nb
        return nb

    def has_edge(self, a: int, b: int) -> bool:
        return bool(self.adj[a, b])

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def edges(self) -> list:
        a, b = np.nonzero(np.triu(self.adj, 1))
        return [(int(x), int(y)) for x, y in zip(a, b)]


def build_graph(positions, tx_range: float, failed_set=()) -> ConnectivityGraph:
    """Edge iff euclidean distance <= tx_range and neither endpoint failed."""
    pos = np.asarray(positions, dtype=float)
    x, y = pos[:, 0], pos[:, 1]
    d2 = np.subtract.outer(x, x)
    d2 *= d2
    dy = np.subtract.outer(y, y)
    dy *= dy
    d2 += dy
    adj = d2 <= tx_range * tx_range
    adj.flat[::len(x) + 1] = False
    failed = list(failed_set)
    if failed:
        adj[failed, :] = False
        adj[:, failed] = False
    return ConnectivityGraph(adj)


def arbitrate(requests, graph: ConnectivityGraph, contention_enabled: bool, slot: int = 0) -> list:
    """Resolve one slot's transmission requests into one event per request."""
    if not requests:
        return []
    outcome = [None] * len(requests)
    adj = graph.adj
    live = []
    for k, r in enumerate(requests):
        if r.payload_kind is PayloadKind.BEACON:
            outcome[k] = Outcome.DELIVERED
        elif not adj[r.sender, r.receiver]:
            outcome[k] = Outcome.DEFERRED
        else:
            live.append(k)

    if not contention_enabled:
        for k in live:
            outcome[k] = Outcome.DELIVERED
        return [TransmissionEvent(r, o, slot) for r, o in zip(requests, outcome)]

    # (a) one send per sender
    chosen = {}
    for k in live:
        r = requests[k]
        best = chosen.get(r.sender)
        if best is None or (r.msg_id, r.receiver) < (requests[best].msg_id, requests[best].receiver):
            chosen[r.sender] = k
    keep = set(chosen.values())
    for k in live:
        if k not in keep:
            outcome[k] = Outcome.DEFERRED
    transmitters = set(chosen)

    # (b) half duplex, then (c) collisions
    tx_idx = np.fromiter(transmitters, dtype=np.intp, count=len(transmitters))
    heard = adj[:, tx_idx].sum(axis=1)
    for k in sorted(keep):
        r = requests[k]
        if r.receiver in transmitters:
            outcome[k] = Outcome.DEFERRED
        elif heard[r.receiver] >= 2:
            outcome[k] = Outcome.COLLIDED
        else:
            outcome[k] = Outcome.DELIVERED
    return [TransmissionEvent(r, o, slot) for r, o in zip(requests, outcome)]


def apply_failures(failed_set, failures, slot: int, holdings=None) -> frozenset:
    """Return the failed set at ``slot``; copies held by newly failed nodes become stuck.

    ``holdings`` optionally maps node id to its iterable of copies.
    """
    now = set(failed_set)
    for node, fail_slot in failures:
        if fail_slot <= slot:
            now.add(node)
    if holdings is not None:
        for node in now.difference(failed_set):
            for c in holdings[node]:
                c.stuck = True
    return frozenset(now)
