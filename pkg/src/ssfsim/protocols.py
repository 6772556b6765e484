"""Routing protocols: Spray Select Focus and the baselines it is compared with.

Each protocol turns a node's local view into a list of actions for the slot.
Decisions read only the view and the node's own random stream; the engine
applies them. When the medium models contention a node may start at most one
send per slot (``view.send_limit == 1``), so spraying and flooding are paced
one hand-off per slot; without contention there is no cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .medium import ConnectivityGraph
from .model import Message, MessageCopy, Phase, Protocol
from .routing import Route, bypass_recovery, shortest_hop_route
from .utility import NEVER, EncounterTimers, focus_decision


@dataclass(frozen=True)
class HandOff:
    msg_id: int
    to: int
    n_transfer: int
    phase: Phase
    route: Optional[tuple] = None
    replicate: bool = False
    u_from: Optional[float] = None
    u_to: Optional[float] = None


@dataclass(frozen=True)
class Deliver:
    msg_id: int
    destination: int
    n_transfer: int = 1
    replicate: bool = False


@dataclass(frozen=True)
class Hold:
    msg_id: int


@dataclass(frozen=True)
class SwitchPhase:
    msg_id: int
    phase: Phase
    route: Optional[tuple] = None


@dataclass(frozen=True)
class Discard:
    msg_id: int


SENDS = (HandOff, Deliver)


class NodeView:
    """What one node can see at the start of a slot.

    ``seen`` and ``knows`` are node x message boolean matrices: whether a node
    has ever held a message (advertised in beacons) and whether it has learned
    that the message was delivered. Only rows of the node and its neighbours
    are meant to be read.
    """

    __slots__ = ("node", "slot", "copies", "messages", "neighbors", "graph", "timers",
                 "seen", "knows", "send_limit", "rng", "_prev_row", "_new")

    def __init__(self, node, slot, copies, messages, neighbors, graph, timers, seen,
                 knows=None, send_limit=1, rng=None, prev_adj_row=None, new_neighbors=None):
        self.node = node
        self.slot = slot
        self.copies = copies
        self.messages = messages
        self.neighbors = neighbors
        self.graph = graph
        self.timers = timers
        self.seen = seen
        self.knows = knows
        self.send_limit = send_limit
        self.rng = rng
        self._prev_row = prev_adj_row
        self._new = None if new_neighbors is None else frozenset(new_neighbors)

    @property
    def new_neighbors(self) -> frozenset:
        """Neighbours whose encounter started this slot."""
        if self._new is None:
            if self._prev_row is None:
                self._new = frozenset(self.neighbors)
            else:
                self._new = frozenset(nb for nb in self.neighbors if not self._prev_row[nb])
        return self._new

    def has_seen(self, node: int, msg_id: int) -> bool:
        return bool(self.seen[node, msg_id])

    def knows_delivered(self, msg_id: int) -> bool:
        return self.knows is not None and bool(self.knows[self.node, msg_id])

    def utility_of(self, node: int, destination: int) -> float:
        return self.timers.utility(node, destination, self.slot)


class _Budget:
    def __init__(self, limit):
        self.left = limit

    def take(self) -> bool:
        if self.left is None:
            return True
        if self.left <= 0:
            return False
        self.left -= 1
        return True

    @property
    def spent(self) -> bool:
        return self.left is not None and self.left <= 0


class RoutingProtocol:
    """Base class. Subclasses implement :meth:`copy_actions`."""

    name: Protocol
    source_phase = Phase.WAIT
    # protocols without local actions stop looking at copies once the send budget is used
    local_actions = True

    def on_message_created(self, msg: Message) -> MessageCopy:
        return MessageCopy(msg.msg_id, msg.source, msg.copy_budget_L, self.source_phase)

    def active_nodes(self, adj, seen, holding):
        """Optional exact prefilter: nodes whose ``on_slot`` can return anything.

        ``None`` means every holder must be asked.
        """
        return None

    def decide_batch(self, adj, seen, holding, destinations, send_limit):
        """Optional vectorised form of ``on_slot`` for every node at once.

        Returns ``{node: actions}`` for nodes with sends, or ``None`` when the
        protocol has no batch form and must be asked node by node.
        """
        return None

    def on_receive(self, copy: MessageCopy) -> None:
        pass

    def on_send_failed(self, copy: MessageCopy, outcome) -> None:
        pass

    def on_slot(self, view: NodeView) -> list:
        budget = _Budget(view.send_limit)
        actions = []
        for msg_id in sorted(view.copies):
            if budget.spent and not self.local_actions:
                break
            copy = view.copies[msg_id]
            msg = view.messages[msg_id]
            acts = self.copy_actions(view, copy, msg, budget)
            actions.extend(acts if acts else [Hold(msg_id)])
        return actions

    def copy_actions(self, view, copy, msg, budget) -> list:
        raise NotImplementedError


def _deliver_if_adjacent(view, copy, msg, budget, replicate=False):
    if msg.destination in view.neighbors and budget.take():
        n = 1 if replicate else copy.n_copies
        return [Deliver(msg.msg_id, msg.destination, n, replicate)]
    return None


def _as_f32(a):
    # boolean matmul has no BLAS path; counts stay exact in float32
    return a.astype(np.float32)


class NormalFlooding(RoutingProtocol):
    """Epidemic replication to every neighbour that has not seen the message."""

    name = Protocol.NORMAL
    local_actions = False

    def active_nodes(self, adj, seen, holding):
        # holds m and some neighbour has not seen m
        return (holding & (_as_f32(adj) @ _as_f32(~seen) > 0)).any(axis=1)

    def decide_batch(self, adj, seen, holding, destinations, send_limit):
        # only the paced case reduces to "first message, first receiver"
        if send_limit != 1:
            return None
        has = holding & (_as_f32(adj) @ _as_f32(~seen) > 0)
        nodes = np.flatnonzero(has.any(axis=1))
        if not len(nodes):
            return {}
        m = has[nodes].argmax(axis=1)
        rows = adj[nodes] & ~seen[:, m].T
        d = destinations[m]
        to_dest = rows[np.arange(len(nodes)), d]
        recv = np.where(to_dest, d, rows.argmax(axis=1))
        out = {}
        for i, mm, r, td in zip(nodes.tolist(), m.tolist(), recv.tolist(), to_dest.tolist()):
            out[i] = [Deliver(mm, r, 1, replicate=True) if td
                      else HandOff(mm, r, 1, Phase.WAIT, replicate=True)]
        return out

    def on_slot(self, view):
        if not view.neighbors:
            return []
        msgs = sorted(view.copies)
        fresh = ~view.seen[list(view.neighbors)][:, msgs]
        if not fresh.any():
            return []
        budget = _Budget(view.send_limit)
        actions = []
        for j in np.flatnonzero(fresh.any(axis=0)):
            if budget.spent:
                break
            msg_id = msgs[j]
            actions.extend(self.copy_actions(view, view.copies[msg_id], view.messages[msg_id], budget))
        return actions

    def copy_actions(self, view, copy, msg, budget):
        if msg.destination in view.neighbors and not view.has_seen(msg.destination, msg.msg_id):
            if not budget.take():
                return []
            out = [Deliver(msg.msg_id, msg.destination, 1, replicate=True)]
        else:
            out = []
        for nb in view.neighbors:
            if budget.spent:
                break
            if nb == msg.destination or view.has_seen(nb, msg.msg_id):
                continue
            budget.take()
            out.append(HandOff(msg.msg_id, nb, 1, Phase.WAIT, replicate=True))
        return out


class DirectTransmission(RoutingProtocol):
    name = Protocol.DIRECT
    local_actions = False

    def on_message_created(self, msg):
        return MessageCopy(msg.msg_id, msg.source, 1, Phase.WAIT)

    def copy_actions(self, view, copy, msg, budget):
        return _deliver_if_adjacent(view, copy, msg, budget)


class SprayAndWait(RoutingProtocol):
    """Source spraying: one unit to each new relay until one unit is left."""

    name = Protocol.SPRAY_WAIT
    source_phase = Phase.SPRAY

    def copy_actions(self, view, copy, msg, budget):
        got = _deliver_if_adjacent(view, copy, msg, budget)
        if got:
            return got
        if copy.phase is not Phase.SPRAY:
            return []
        if copy.n_copies <= 1:
            return [SwitchPhase(msg.msg_id, Phase.WAIT)]
        out = []
        left = copy.n_copies
        for nb in view.neighbors:
            if left <= 1 or budget.spent:
                break
            if nb == msg.destination or view.has_seen(nb, msg.msg_id):
                continue
            budget.take()
            out.append(HandOff(msg.msg_id, nb, 1, Phase.WAIT))
            left -= 1
        return out


class BinarySprayAndWait(RoutingProtocol):
    """Any carrier with n > 1 hands floor(n/2) to a new relay and keeps ceil(n/2)."""

    name = Protocol.BINARY_SW
    source_phase = Phase.SPRAY

    @staticmethod
    def split(n: int) -> tuple:
        give = n // 2
        return give, n - give

    def copy_actions(self, view, copy, msg, budget):
        got = _deliver_if_adjacent(view, copy, msg, budget)
        if got:
            return got
        if copy.n_copies <= 1:
            return [SwitchPhase(msg.msg_id, Phase.WAIT)] if copy.phase is Phase.SPRAY else []
        out = []
        left = copy.n_copies
        for nb in view.neighbors:
            if left <= 1 or budget.spent:
                break
            if nb == msg.destination or view.has_seen(nb, msg.msg_id):
                continue
            budget.take()
            give, left = self.split(left)
            out.append(HandOff(msg.msg_id, nb, give, Phase.SPRAY if give > 1 else Phase.WAIT))
        return out


class SeekAndFocus(RoutingProtocol):
    """Single copy: random hand-off to fresh encounters until the carrier has met
    the destination, then utility-gated forwarding."""

    name = Protocol.SEEK_FOCUS
    source_phase = Phase.FOCUS

    def on_message_created(self, msg):
        return MessageCopy(msg.msg_id, msg.source, 1, Phase.FOCUS)

    def copy_actions(self, view, copy, msg, budget):
        got = _deliver_if_adjacent(view, copy, msg, budget)
        if got:
            return got
        u_a = view.utility_of(view.node, msg.destination)
        if u_a == -np.inf:
            fresh = sorted(nb for nb in view.new_neighbors if nb != msg.destination)
            if not fresh or not budget.take():
                return []
            pick = fresh[0] if len(fresh) == 1 else fresh[int(view.rng.integers(len(fresh)))]
            return [HandOff(msg.msg_id, pick, copy.n_copies, Phase.FOCUS,
                            u_from=u_a, u_to=view.utility_of(pick, msg.destination))]
        return _focus_handoff(view, copy, msg, budget, u_a, exclude=())


def _focus_handoff(view, copy, msg, budget, u_a, exclude):
    cands = [nb for nb in view.neighbors if nb not in exclude]
    if not cands:
        return []
    # lowest id wins ties, as argmax returns the first maximum
    col = view.timers.last[cands, msg.destination]
    k = int(col.argmax())
    if col[k] == NEVER:
        return []
    best, u_best = cands[k], float(col[k])
    if not focus_decision(u_a, u_best) or not budget.take():
        return []
    return [HandOff(msg.msg_id, best, copy.n_copies, Phase.FOCUS, u_from=u_a, u_to=u_best)]


class SpraySelectFocus(RoutingProtocol):
    """Spray L units to distinct neighbours, route each along a minimum-hop path
    that avoids its past carriers, and fall back to utility forwarding when no
    path (or no detour around a broken hop) exists.

    Focus is terminal: a copy that lost its route is only ever forwarded on
    utility. Copies are dropped once the carrier learns of the delivery.
    """

    name = Protocol.SSF
    source_phase = Phase.SPRAY

    def on_slot(self, view):
        # an isolated carrier can only act on a receipt or an unrouted Select copy
        if not view.neighbors and not any(
                c.phase is Phase.SELECT or view.knows_delivered(m)
                for m, c in view.copies.items()):
            return [Hold(m) for m in sorted(view.copies)]
        return super().on_slot(view)

    def copy_actions(self, view, copy, msg, budget):
        if view.knows_delivered(msg.msg_id):
            return [Discard(msg.msg_id)]
        got = _deliver_if_adjacent(view, copy, msg, budget)
        if got:
            return got
        if copy.phase is Phase.SPRAY:
            return self._spray(view, copy, msg, budget)
        if copy.phase is Phase.SELECT:
            return self._select(view, copy, msg, budget)
        return self._focus(view, copy, msg, budget)

    def _spray(self, view, copy, msg, budget):
        out = []
        left = copy.n_copies
        fresh = [nb for nb in view.neighbors
                 if nb not in copy.visited and not view.has_seen(nb, msg.msg_id)]
        if len(fresh) > 1 and left > 0 and not budget.spent:
            fresh.sort(key=lambda nb: (self._hops_to(view, nb, msg.destination, copy.visited), nb))
        for nb in fresh:
            if left == 0 or budget.spent:
                break
            budget.take()
            out.append(HandOff(msg.msg_id, nb, 1, Phase.SELECT))
            left -= 1
        return out

    @staticmethod
    def _hops_to(view, nb, dst, visited) -> float:
        """Relays with a shorter route to the destination are sprayed first."""
        r = shortest_hop_route(view.graph, nb, dst, visited)
        return math.inf if r is None else r.hop_count

    def _select(self, view, copy, msg, budget):
        out = []
        route = copy.planned_route
        if route is None or len(route) < 2:
            found = shortest_hop_route(view.graph, view.node, msg.destination,
                                       copy.visited, view.slot)
            if found is None:
                out.append(SwitchPhase(msg.msg_id, Phase.FOCUS))
                return out + self._utility_step(view, copy, msg, budget)
            route = found.hops
            out.append(SwitchPhase(msg.msg_id, Phase.SELECT, route))
        elif not view.graph.has_edge(view.node, route[1]):
            detour = bypass_recovery(Route(route, view.slot), route[1], view.graph,
                                     copy.visited - {view.node}, view.slot)
            if detour is None:
                out.append(SwitchPhase(msg.msg_id, Phase.FOCUS))
                return out + self._utility_step(view, copy, msg, budget)
            route = detour.hops
            out.append(SwitchPhase(msg.msg_id, Phase.SELECT, route))
        return out + self._forward(copy, msg, route, budget)

    def _forward(self, copy, msg, route, budget):
        if not budget.take():
            return []
        nxt = route[1]
        if nxt == msg.destination:
            return [Deliver(msg.msg_id, nxt, copy.n_copies)]
        return [HandOff(msg.msg_id, nxt, copy.n_copies, Phase.SELECT, route=route[1:])]

    def _focus(self, view, copy, msg, budget):
        return self._utility_step(view, copy, msg, budget)

    def _utility_step(self, view, copy, msg, budget):
        u_a = view.utility_of(view.node, msg.destination)
        return _focus_handoff(view, copy, msg, budget, u_a, exclude=copy.visited)


PROTOCOLS = {
    Protocol.NORMAL: NormalFlooding,
    Protocol.DIRECT: DirectTransmission,
    Protocol.SPRAY_WAIT: SprayAndWait,
    Protocol.BINARY_SW: BinarySprayAndWait,
    Protocol.SEEK_FOCUS: SeekAndFocus,
    Protocol.SSF: SpraySelectFocus,
}


def make_protocol(name) -> RoutingProtocol:
    return PROTOCOLS[Protocol(name)]()
