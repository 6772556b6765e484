"""Deterministic slot loop.

Sub-step order inside a slot is fixed: failures, mobility, coverage graph,
beacons (encounter timers and delivery-receipt gossip), message creation,
protocol decisions in node-id order, arbitration, application of delivered
transmissions, logging.

A node whose send collided or was deferred becomes backlogged: in each later
slot it transmits with probability 1/2 (drawn from its own MAC stream) until a
send of its goes through. Without this two nodes that keep choosing each
other, or two senders sharing a receiver, would retry in lockstep forever.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from dataclasses import replace as dc_replace
from typing import Optional

import numpy as np

from . import rng as rngmod
from .medium import (
    ConnectivityGraph, Outcome, PayloadKind, TransmissionRequest,
    apply_failures, arbitrate, build_graph,
)
from .metrics import MetricsReport, build_report, packet_delay
from .mobility import MobilityState, init_positions, step_mobility
from .model import ConfigError, Message, SimConfig, SimTime, validate_config
from .protocols import (
    Deliver, Discard, HandOff, NodeView, SwitchPhase, make_protocol,
)
from .utility import EncounterTimers

RETRY_PROBABILITY = 0.5


@dataclass
class MessageStats:
    message: Message
    h_distance: float
    transmissions: int = 0
    covered: set = field(default_factory=set)
    units_delivered: int = 0
    units_discarded: int = 0
    delivered_slot: Optional[int] = None
    delivery_path: Optional[tuple] = None
    discard_slots: list = field(default_factory=list)


@dataclass
class SimState:
    config: SimConfig
    slot: int
    mobility: MobilityState
    failed: frozenset
    timers: EncounterTimers
    copies: list
    seen: np.ndarray
    holding: np.ndarray
    destinations: np.ndarray
    messages: dict
    stats: dict
    knows: np.ndarray
    backlog: np.ndarray
    mac_rngs: list
    proto_rngs: list
    protocol: object
    graph: Optional[ConnectivityGraph] = None
    prev_adj: Optional[np.ndarray] = None
    log: list = field(default_factory=list)
    schedule: dict = field(default_factory=dict)
    any_delivered: bool = False

    @property
    def failed_mask(self) -> np.ndarray:
        m = np.zeros(self.config.num_nodes, dtype=bool)
        if self.failed:
            m[list(self.failed)] = True
        return m

    def units_held(self, msg_id: int) -> int:
        return sum(c[msg_id].n_copies for c in self.copies if msg_id in c)

    def unit_balance(self, msg_id: int) -> int:
        """Held + delivered + discarded units of one message."""
        st = self.stats[msg_id]
        return self.units_held(msg_id) + st.units_delivered + st.units_discarded

    def holders(self, msg_id: int) -> list:
        return [i for i, c in enumerate(self.copies) if msg_id in c]

    def all_copies(self):
        for held in self.copies:
            yield from held.values()

    def done(self) -> bool:
        if self.slot >= self.config.max_slots:
            return True
        if len(self.messages) < len(self.config.traffic):
            return False
        return all(st.delivered_slot is not None for st in self.stats.values())

    def node_state(self, i: int):
        from .model import NodeState

        m = self.mobility
        return NodeState(
            id=i,
            position=(float(m.position[i, 0]), float(m.position[i, 1])),
            waypoint=(float(m.waypoint[i, 0]), float(m.waypoint[i, 1])),
            speed=float(m.speed[i]),
            failed=i in self.failed,
            copies=tuple(self.copies[i][k] for k in sorted(self.copies[i])),
            timers=tuple(int(v) for v in self.timers.table(i)),
        )


_SENDS = (HandOff, Deliver)


def init_state(config: SimConfig, mobility: Optional[MobilityState] = None) -> SimState:
    problems = validate_config(config)
    if problems:
        raise ConfigError(problems)
    n = config.num_nodes
    # an injected state is copied so the caller's object is not advanced
    mobility = init_positions(config) if mobility is None else mobility.copy()
    return SimState(
        config=config,
        slot=0,
        mobility=mobility,
        failed=frozenset(),
        timers=EncounterTimers(n),
        copies=[{} for _ in range(n)],
        seen=np.zeros((n, len(config.traffic)), dtype=bool),
        holding=np.zeros((n, len(config.traffic)), dtype=bool),
        destinations=np.array([t[1] for t in config.traffic], dtype=np.intp),
        messages={},
        stats={},
        knows=np.zeros((n, len(config.traffic)), dtype=bool),
        backlog=np.zeros(n, dtype=bool),
        mac_rngs=rngmod.node_streams(config.seed, rngmod.MAC, n),
        proto_rngs=rngmod.node_streams(config.seed, rngmod.PROTOCOL, n),
        protocol=make_protocol(config.protocol),
        schedule=_traffic_schedule(config),
    )


def _traffic_schedule(config: SimConfig) -> dict:
    sched = {}
    for msg_id, (src, dst, at) in enumerate(config.traffic):
        sched.setdefault(at, []).append((msg_id, src, dst))
    return sched


def step(state: SimState, config: Optional[SimConfig] = None) -> SimState:
    """Advance ``state`` by one slot in place and return it."""
    cfg = config or state.config
    t = state.slot
    if t >= cfg.max_slots:
        raise ValueError("horizon reached")
    n = cfg.num_nodes

    # failures
    before = state.failed
    if any(at <= t and node not in before for node, at in cfg.failures):
        state.failed = apply_failures(before, cfg.failures, t,
                                      holdings=[c.values() for c in state.copies])
        for node in sorted(state.failed - before):
            state.log.append((t, "fail", node))
    failed_mask = state.failed_mask

    # mobility and coverage
    step_mobility(state.mobility, cfg.slot_duration, failed_mask)
    graph = build_graph(state.mobility.position, cfg.tx_range, state.failed)
    state.prev_adj = state.graph.adj if state.graph is not None else np.zeros((n, n), dtype=bool)
    state.graph = graph
    adj = graph.adj

    # beacons: timers and one-hop gossip of delivery receipts
    state.timers.record_graph(adj, t)
    if state.any_delivered:
        cols = np.flatnonzero(state.knows.any(axis=0))
        known = state.knows[:, cols]
        heard = adj.astype(np.float32) @ known.astype(np.float32) > 0
        state.knows[:, cols] = known | (heard & ~failed_mask[:, None])

    # traffic
    for msg_id, src, dst in state.schedule.get(t, ()):
        msg = Message(msg_id, src, dst, cfg.packet_size, SimTime(t, cfg.slot_duration),
                      cfg.budget_for())
        state.messages[msg_id] = msg
        p = state.mobility.position
        state.stats[msg_id] = MessageStats(msg, float(math.dist(p[src], p[dst])))
        copy = state.protocol.on_message_created(msg)
        copy.stuck = src in state.failed
        state.copies[src][msg_id] = copy
        state.seen[src, msg_id] = True
        state.holding[src, msg_id] = True
        state.stats[msg_id].covered.add(src)
        state.log.append((t, "create", src, msg_id))

    # decisions
    send_limit = 1 if cfg.contention_enabled else None
    requests, sends = [], []
    batch = state.protocol.decide_batch(adj, state.seen, state.holding,
                                        state.destinations, send_limit)
    if batch is None:
        active = state.protocol.active_nodes(adj, state.seen, state.holding)
        order = [i for i in range(n) if state.copies[i] and i not in state.failed
                 and (active is None or active[i])]
    else:
        order = sorted(batch)
    backlog = state.backlog.tolist()
    for node in order:
        held = state.copies[node]
        if batch is not None:
            actions = batch[node]
        else:
            view = NodeView(
                node, t, held, state.messages, graph.neighbors(node), graph, state.timers,
                state.seen, state.knows, send_limit, state.proto_rngs[node],
                prev_adj_row=state.prev_adj[node],
            )
            actions = state.protocol.on_slot(view)
        silent = False
        if backlog[node] and any(type(a) in _SENDS for a in actions):
            silent = state.mac_rngs[node].random() >= RETRY_PROBABILITY
        for a in actions:
            kind = type(a)
            if kind is HandOff or kind is Deliver:
                if silent:
                    continue
                if kind is HandOff:
                    requests.append(TransmissionRequest(node, a.to, a.msg_id, PayloadKind.COPY_HANDOFF))
                else:
                    requests.append(TransmissionRequest(node, a.destination, a.msg_id, PayloadKind.DELIVERY))
                sends.append(a)
            elif kind is SwitchPhase:
                c = held[a.msg_id]
                if c.phase is not a.phase:
                    state.log.append((t, "phase", node, a.msg_id, a.phase.value))
                c.phase = a.phase
                c.planned_route = None if a.route is None else tuple(a.route)
            elif kind is Discard:
                c = held.pop(a.msg_id)
                state.holding[node, a.msg_id] = False
                st = state.stats[a.msg_id]
                st.units_discarded += c.n_copies
                st.discard_slots.append(t - st.delivered_slot if st.delivered_slot is not None else None)
                state.log.append((t, "discard", node, a.msg_id, c.n_copies))

    # arbitration and application
    events = arbitrate(requests, graph, cfg.contention_enabled, t)
    succeeded, failed_senders = set(), set()
    for ev, action in zip(events, sends):
        r = ev.request
        if ev.outcome is Outcome.DELIVERED:
            _apply_transfer(state, r.sender, r.receiver, action, t)
            succeeded.add(r.sender)
        else:
            failed_senders.add(r.sender)
            c = state.copies[r.sender].get(r.msg_id)
            if c is not None:
                state.protocol.on_send_failed(c, ev.outcome)
        state.log.append((t, "tx", r.sender, r.receiver, r.msg_id, ev.outcome.value))
    for s in failed_senders:
        state.backlog[s] = True
    for s in succeeded:
        state.backlog[s] = False

    state.slot = t + 1
    return state


def _apply_transfer(state: SimState, sender: int, receiver: int, action, t: int) -> None:
    msg_id = action.msg_id
    msg = state.messages[msg_id]
    st = state.stats[msg_id]
    src_copy = state.copies[sender].get(msg_id)
    if src_copy is None:
        return
    st.transmissions += 1
    st.covered.add(receiver)
    n = action.n_transfer
    if not action.replicate:
        src_copy.n_copies -= n
        if src_copy.n_copies <= 0:
            del state.copies[sender][msg_id]
            state.holding[sender, msg_id] = False
    state.seen[receiver, msg_id] = True

    if receiver == msg.destination:
        if not action.replicate:
            st.units_delivered += n
        if st.delivered_slot is None:
            st.delivered_slot = t
            st.delivery_path = tuple(src_copy.path) + (receiver,)
            state.log.append((t, "delivered", receiver, msg_id, len(src_copy.path)))
        state.knows[receiver, msg_id] = True
        state.any_delivered = True
        return

    if isinstance(action, HandOff) and action.u_from is not None:
        state.log.append((t, "focus", sender, receiver, msg_id, action.u_from, action.u_to))
    held = state.copies[receiver]
    existing = held.get(msg_id)
    if existing is not None:
        if not action.replicate:
            existing.n_copies += n
        return
    new = src_copy.moved_to(receiver, 1 if action.replicate else n, action.phase, action.route)
    held[msg_id] = new
    state.holding[receiver, msg_id] = True
    state.protocol.on_receive(new)
    state.log.append((t, "carry", receiver, msg_id, tuple(new.path)))


@dataclass
class RunResult:
    config: SimConfig
    seed: int
    reports: list
    slots_run: int
    log: Optional[list] = None
    discard_latencies: list = field(default_factory=list)

    def at_packet_size(self, packet_size: int) -> "RunResult":
        """The same run reported for another packet size.

        Packet size is an abstract unit that only enters the PD formula, so
        the trajectory, log and every other metric are unchanged.
        """
        reports = [r if r.h_hops is None else dc_replace(
                       r, pd_paper=packet_delay(packet_size, r.h_hops, r.t_min))
                   for r in self.reports]
        return dc_replace(self, config=self.config.replace(packet_size=packet_size),
                          reports=reports)

    def to_json(self) -> str:
        cfg = self.config
        doc = {
            "config": {
                "num_nodes": cfg.num_nodes, "area": list(cfg.area), "tx_range": cfg.tx_range,
                "slot_duration": cfg.slot_duration, "max_slots": cfg.max_slots,
                "v_min": cfg.v_min, "v_max": cfg.v_max, "copy_budget_L": cfg.copy_budget_L,
                "packet_size": cfg.packet_size, "protocol": cfg.protocol.value,
                "contention_enabled": cfg.contention_enabled,
                "failures": [list(f) for f in cfg.failures],
                "traffic": [list(x) for x in cfg.traffic], "seed": cfg.seed,
            },
            "seed": self.seed,
            "slots_run": self.slots_run,
            "reports": [r.as_dict() for r in self.reports],
            "log": self.log,
            "discard_latencies": self.discard_latencies,
        }
        return json.dumps(doc, sort_keys=True)


def finish(state: SimState, keep_log: bool = False) -> RunResult:
    cfg = state.config
    reports = []
    for msg_id in range(len(cfg.traffic)):
        st = state.stats.get(msg_id)
        if st is None:
            continue
        reports.append(build_report(st, horizon_slot=state.slot, slot_duration=cfg.slot_duration))
    lat = [d for st in state.stats.values() for d in st.discard_slots if d is not None]
    return RunResult(cfg, cfg.seed, reports, state.slot, state.log if keep_log else None, lat)


def run_simulation(config: SimConfig, keep_log: bool = False,
                   mobility: Optional[MobilityState] = None) -> RunResult:
    """Run until the horizon or until every message is delivered.

    ``mobility`` replaces the seeded initial placement (scripted scenarios).
    """
    problems = validate_config(config)
    if problems:
        raise ConfigError(problems)
    state = init_state(config, mobility)
    while not state.done():
        step(state)
    return finish(state, keep_log)


def run_stepwise(config: SimConfig, mobility: Optional[MobilityState] = None):
    """Yield the state after every slot; handy for per-slot invariant checks."""
    state = init_state(config, mobility)
    while not state.done():
        step(state)
        yield state


# Space-time reachability oracle (test surface).

def slot_graphs(config: SimConfig, mobility: Optional[MobilityState] = None):
    """Replay trajectories and failures; yield the coverage adjacency of each slot."""
    mob = init_positions(config) if mobility is None else mobility.copy()
    failed = frozenset()
    for t in range(config.max_slots):
        failed = apply_failures(failed, config.failures, t)
        mask = np.zeros(config.num_nodes, dtype=bool)
        if failed:
            mask[list(failed)] = True
        step_mobility(mob, config.slot_duration, mask)
        yield build_graph(mob.position, config.tx_range, failed).adj


def spacetime_reachable(config: SimConfig, msg, mobility: Optional[MobilityState] = None) -> bool:
    """True iff a store-carry-forward path links source to destination in time.

    ``msg`` is a Message or a (source, destination, creation_slot) triple. A
    transmission occupies a whole slot, so a path uses at most one edge per
    slot: a node reached during slot t forwards from slot t+1 on, over edges
    present at that later slot.
    """
    src, dst, created = _msg_triple(msg)
    reached = np.zeros(config.num_nodes, dtype=bool)
    reached[src] = True
    for t, adj in enumerate(slot_graphs(config, mobility)):
        if t < created:
            continue
        reached = reached | adj[:, reached].any(axis=1)
        if reached[dst]:
            return True
    return False


def spacetime_reachable_reverse(config: SimConfig, msg, mobility=None) -> bool:
    """Independent backward-in-time formulation of :func:`spacetime_reachable`."""
    src, dst, created = _msg_triple(msg)
    graphs = list(slot_graphs(config, mobility))
    can = {dst}
    for t in range(len(graphs) - 1, created - 1, -1):
        adj = graphs[t]
        grown = set(can)
        for u in range(config.num_nodes):
            if u in can:
                continue
            for v in can:
                if adj[u, v]:
                    grown.add(u)
                    break
        can = grown
    return src in can


def _msg_triple(msg):
    if isinstance(msg, Message):
        return msg.source, msg.destination, msg.created_at.slot
    return tuple(msg)
