"""Minimum-hop route selection on a coverage snapshot, with bypass around dead ends."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .medium import ConnectivityGraph


@dataclass(frozen=True)
class Route:
    hops: tuple
    computed_at: int = 0

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1

    @property
    def destination(self) -> int:
        return self.hops[-1]


def shortest_hop_route(graph: ConnectivityGraph, src: int, dst: int,
                       excluded=frozenset(), computed_at: int = 0) -> Optional[Route]:
    """Breadth-first minimum-hop route from ``src`` to ``dst``.

    Nodes in ``excluded`` are never traversed; ``src`` itself may be excluded
    and still act as origin. Neighbours expand in ascending id order, which makes
    the result the lexicographically smallest of all minimum-hop routes.
    Returns ``None`` when ``dst`` is unreachable.
    """
    if src == dst:
        return Route((src,), computed_at)
    if dst in excluded:
        return None
    parent = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v in parent or v in excluded:
                continue
            parent[v] = u
            if v == dst:
                hops = [v]
                while parent[hops[-1]] is not None:
                    hops.append(parent[hops[-1]])
                return Route(tuple(reversed(hops)), computed_at)
            queue.append(v)
    return None


def bypass_recovery(route: Route, failed_node: int, graph: ConnectivityGraph,
                    excluded=frozenset(), computed_at: int = 0) -> Optional[Route]:
    """Splice a fresh shortest suffix around ``failed_node``.

    The prefix strictly before the broken hop is kept, and the suffix is
    recomputed from its last node with the failed node and the rest of the
    prefix excluded. ``None`` means no detour exists.
    """
    hops = route.hops
    if failed_node not in hops:
        raise ValueError(f"node {failed_node} is not on the route")
    cut = hops.index(failed_node)
    if cut == 0:
        return None
    prefix = hops[:cut]
    blocked = set(excluded) | {failed_node} | set(prefix[:-1])
    suffix = shortest_hop_route(graph, prefix[-1], hops[-1], blocked, computed_at)
    if suffix is None:
        return None
    return Route(prefix[:-1] + suffix.hops, computed_at)
