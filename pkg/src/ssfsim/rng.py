"""Deterministic per-node random streams.

Every stream is keyed by (seed, purpose, node id), so adding nodes or
consuming draws for one purpose never perturbs any other stream.
"""

import numpy as np

MOBILITY = 0
MAC = 1
PROTOCOL = 2


def stream(seed: int, purpose: int, node: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(purpose, node)))


def node_streams(seed: int, purpose: int, n: int) -> list:
    return [stream(seed, purpose, i) for i in range(n)]
