import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssfsim.medium import ConnectivityGraph
from ssfsim.model import Message, MessageCopy, Phase, Protocol, SimTime
from ssfsim.protocols import (
    BinarySprayAndWait, Deliver, Discard, Hold, HandOff, NodeView, NormalFlooding, SwitchPhase,
    make_protocol,
)
from ssfsim.utility import EncounterTimers


def msg(dst, src=0, L=1, mid=0):
    return Message(mid, src, dst, 10, SimTime(0), L)


def view(node, graph, copies, messages, seen=None, timers=None, send_limit=1, slot=0,
         knows=None, rng=None, new=None):
    n = graph.n
    m = max(messages) + 1 if messages else 0
    if seen is None:
        seen = np.zeros((n, m), dtype=bool)
        for c in copies.values():
            seen[list(c.visited), c.msg_id] = True
    return NodeView(node, slot, copies, messages, graph.neighbors(node), graph,
                    timers or EncounterTimers(n), seen, knows, send_limit, rng,
                    new_neighbors=new)


def sends(actions):
    return [a for a in actions if isinstance(a, (HandOff, Deliver))]


star = ConnectivityGraph.from_edges(5, [(0, 1), (0, 2), (0, 3)])  # node 4 far away


class TestFlooding:
    proto = NormalFlooding()

    def test_paced_to_one_send_per_slot(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(4)})))
        assert out == [HandOff(0, 1, 1, Phase.WAIT, replicate=True)]

    def test_unpaced_reaches_every_fresh_neighbour(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(4)}, send_limit=None)))
        assert [a.to for a in out] == [1, 2, 3]

    def test_neighbour_with_copy_is_skipped(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        seen = np.zeros((5, 1), dtype=bool)
        seen[[0, 1, 2, 3], 0] = True
        assert sends(self.proto.on_slot(view(0, star, c, {0: msg(4)}, seen=seen))) == []

    def test_destination_first(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(3)})))
        assert out == [Deliver(0, 3, 1, replicate=True)]


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_flooding_batch_equals_per_node_decisions(data):
    n, m = 7, 4
    edges = data.draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                              .filter(lambda e: e[0] < e[1])))
    g = ConnectivityGraph.from_edges(n, edges)
    holding = np.array(data.draw(st.lists(st.lists(st.booleans(), min_size=m, max_size=m),
                                          min_size=n, max_size=n)))
    seen = holding | np.array(data.draw(st.lists(st.lists(st.booleans(), min_size=m, max_size=m),
                                                 min_size=n, max_size=n)))
    dests = [data.draw(st.integers(0, n - 1)) for _ in range(m)]
    messages = {k: Message(k, (dests[k] + 1) % n, dests[k], 5, SimTime(0)) for k in range(m)}
    proto = NormalFlooding()
    batch = proto.decide_batch(g.adj, seen, holding, np.array(dests), 1)
    for node in range(n):
        copies = {k: MessageCopy(k, node, 1, Phase.WAIT) for k in range(m) if holding[node, k]}
        if not copies:
            assert node not in batch
            continue
        want = sends(proto.on_slot(view(node, g, copies, messages, seen=seen)))
        assert batch.get(node, []) == want
    assert proto.decide_batch(g.adj, seen, holding, np.array(dests), None) is None


class TestDirect:
    proto = make_protocol("direct")

    def test_destination_in_range(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        assert sends(self.proto.on_slot(view(0, star, c, {0: msg(2)}))) == [Deliver(0, 2, 1)]

    def test_only_other_neighbours(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        assert self.proto.on_slot(view(0, star, c, {0: msg(4)})) == [Hold(0)]

    def test_failed_destination_is_not_a_neighbour(self):
        g = ConnectivityGraph.from_edges(5, [(0, 1), (0, 2)], failed=[2])
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        assert self.proto.on_slot(view(0, g, c, {0: msg(2)})) == [Hold(0)]


class TestSprayAndWait:
    proto = make_protocol("spray_wait")

    def test_source_spray_arithmetic(self):
        c = {0: MessageCopy(0, 0, 4, Phase.SPRAY)}
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(4, L=4)}, send_limit=None)))
        assert [(a.to, a.n_transfer, a.phase) for a in out] == [
            (1, 1, Phase.WAIT), (2, 1, Phase.WAIT), (3, 1, Phase.WAIT)]

    def test_last_unit_kept_and_source_waits(self):
        c = {0: MessageCopy(0, 0, 1, Phase.SPRAY)}
        assert self.proto.on_slot(view(0, star, c, {0: msg(4, L=4)})) == [SwitchPhase(0, Phase.WAIT)]

    def test_relay_in_wait_holds(self):
        c = {0: MessageCopy(0, 1, 1, Phase.WAIT, path=[0, 1])}
        assert self.proto.on_slot(view(1, star, c, {0: msg(4)})) == [Hold(0)]

    def test_unit_budget_goes_straight_to_wait(self):
        cp = self.proto.on_message_created(msg(4, L=1))
        assert self.proto.on_slot(view(0, star, {0: cp}, {0: msg(4, L=1)})) == [SwitchPhase(0, Phase.WAIT)]


class TestBinarySprayAndWait:
    proto = BinarySprayAndWait()

    @pytest.mark.parametrize("n, split", [(4, (2, 2)), (3, (1, 2)), (5, (2, 3)), (2, (1, 1))])
    def test_split_conserves(self, n, split):
        assert self.proto.split(n) == split
        assert sum(split) == n

    def test_hand_half(self):
        c = {0: MessageCopy(0, 0, 4, Phase.SPRAY)}
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(4, L=4)})))
        assert out == [HandOff(0, 1, 2, Phase.SPRAY)]

    def test_single_unit_delivers(self):
        c = {0: MessageCopy(0, 0, 1, Phase.WAIT)}
        assert sends(self.proto.on_slot(view(0, star, c, {0: msg(1)}))) == [Deliver(0, 1, 1)]


class TestSeekAndFocus:
    proto = make_protocol("seek_focus")

    def test_seek_hands_to_a_new_encounter(self):
        c = {0: MessageCopy(0, 0, 1, Phase.FOCUS)}
        rng = np.random.default_rng(0)
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(4)}, rng=rng, new={1})))
        assert out == [HandOff(0, 1, 1, Phase.FOCUS, u_from=-np.inf, u_to=-np.inf)]

    def test_focus_holds_when_neighbour_is_staler(self):
        t = EncounterTimers(5)
        t.record(0, 4, 30)
        t.record(1, 4, 10)
        c = {0: MessageCopy(0, 0, 1, Phase.FOCUS)}
        assert sends(self.proto.on_slot(view(0, star, c, {0: msg(4)}, timers=t, slot=40))) == []

    def test_focus_forwards_to_fresher_neighbour(self):
        t = EncounterTimers(5)
        t.record(0, 4, 10)
        t.record(2, 4, 30)
        c = {0: MessageCopy(0, 0, 1, Phase.FOCUS)}
        out = sends(self.proto.on_slot(view(0, star, c, {0: msg(4)}, timers=t, slot=40)))
        assert out == [HandOff(0, 2, 1, Phase.FOCUS, u_from=10.0, u_to=30.0)]


def test_seek_focus_hand_trace():
    # Four nodes, destination 3. Encounter schedule, one slot each:
    #   s0: 1-3 meet            (1 learns of 3)
    #   s1: 0-2 meet            carrier 0 has never met 3: seek, hand to 2
    #   s2: 2-1 meet            u_2 = -inf < u_1 = 0: focus, hand to 1
    #   s3: 1-3 meet            deliver
    schedule = [[(1, 3)], [(0, 2)], [(2, 1)], [(1, 3)]]
    proto = make_protocol("seek_focus")
    t = EncounterTimers(4)
    m = {0: msg(3, src=0)}
    copy = MessageCopy(0, 0, 1, Phase.FOCUS)
    carriers, prev = [0], np.zeros((4, 4), dtype=bool)
    for slot, pairs in enumerate(schedule):
        g = ConnectivityGraph.from_edges(4, pairs)
        t.record_graph(g.adj, slot)
        holder = copy.holder
        v = NodeView(holder, slot, {0: copy}, m, g.neighbors(holder), g, t,
                     np.zeros((4, 1), dtype=bool), None, 1, np.random.default_rng(slot),
                     prev_adj_row=prev[holder])
        out = sends(proto.on_slot(v))
        prev = g.adj
        if out and isinstance(out[0], Deliver):
            carriers.append(out[0].destination)
            break
        if out:
            copy = copy.moved_to(out[0].to, 1, Phase.FOCUS)
            carriers.append(copy.holder)
    assert carriers == [0, 2, 1, 3]


def drive(proto, graph, copy, message, max_slots=20):
    """Apply one node's decisions on a static graph until delivery; returns sends."""
    log = []
    for slot in range(max_slots):
        actions = proto.on_slot(view(copy.holder, graph, {0: copy}, {0: message}, slot=slot))
        for a in actions:
            if isinstance(a, SwitchPhase):
                copy.phase = a.phase
                copy.planned_route = a.route and tuple(a.route)
        out = sends(actions)
        if not out:
            continue
        a = out[0]
        log.append(a)
        if isinstance(a, Deliver):
            return log, copy.path + [a.destination]
        copy = copy.moved_to(a.to, a.n_transfer, a.phase, a.route)
    return log, None


class TestSpraySelectFocus:
    proto = make_protocol("ssf")

    def test_spray_to_distinct_relays_one_per_slot(self):
        # destination 4 is unreachable, so relays are ordered by id
        m = msg(4, L=3)
        c = self.proto.on_message_created(m)
        got = []
        for slot in range(3):
            seen = np.zeros((5, 1), dtype=bool)
            seen[[0] + [h.to for h in got], 0] = True
            out = sends(self.proto.on_slot(view(0, star, {0: c}, {0: m}, seen=seen)))
            assert len(out) == 1
            got.extend(out)
            c.n_copies -= out[0].n_transfer
        assert [(h.to, h.n_transfer, h.phase) for h in got] == [
            (1, 1, Phase.SELECT), (2, 1, Phase.SELECT), (3, 1, Phase.SELECT)]
        visited = [MessageCopy(0, 0, 3, Phase.SPRAY).moved_to(h.to, 1, h.phase).visited for h in got]
        assert visited == [{0, 1}, {0, 2}, {0, 3}]

    def test_select_follows_static_four_hop_path(self):
        line = ConnectivityGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        log, path = drive(self.proto, line, MessageCopy(0, 0, 1, Phase.SELECT), msg(4))
        assert len(log) == 4
        assert path == [0, 1, 2, 3, 4]

    def test_broken_route_without_bypass_switches_to_focus(self):
        # planned 0-1-2 but node 1 has gone and nothing else reaches 2
        g = ConnectivityGraph.from_edges(4, [(0, 3)], failed=[1])
        c = MessageCopy(0, 0, 1, Phase.SELECT, planned_route=(0, 1, 2))
        out = self.proto.on_slot(view(0, g, {0: c}, {0: msg(2)}))
        assert SwitchPhase(0, Phase.FOCUS) in out

    def test_broken_route_with_bypass_replans(self):
        g = ConnectivityGraph.from_edges(4, [(0, 3), (3, 2)], failed=[1])
        c = MessageCopy(0, 0, 1, Phase.SELECT, planned_route=(0, 1, 2))
        out = self.proto.on_slot(view(0, g, {0: c}, {0: msg(2)}))
        assert out[0] == SwitchPhase(0, Phase.SELECT, (0, 3, 2))
        assert out[1] == HandOff(0, 3, 1, Phase.SELECT, route=(3, 2))

    def test_focus_never_returns_to_a_visited_carrier(self):
        t = EncounterTimers(5)
        t.record(1, 4, 50)
        c = MessageCopy(0, 0, 1, Phase.FOCUS, path=[1, 0])
        assert sends(self.proto.on_slot(view(0, star, {0: c}, {0: msg(4)}, timers=t, slot=60))) == []

    def test_delivery_receipt_discards(self):
        knows = np.ones((5, 1), dtype=bool)
        c = MessageCopy(0, 0, 1, Phase.FOCUS)
        assert self.proto.on_slot(view(0, star, {0: c}, {0: msg(4)}, knows=knows)) == [Discard(0)]


def test_make_protocol_by_name():
    for p in Protocol:
        assert make_protocol(p.value).name is p
