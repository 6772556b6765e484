"""Seed/protocol sweeps and the results CSV.

Rows come out in (protocol, seed, msg_id) order whatever the worker count;
``SIM_THREADS`` caps the number of worker processes.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ProcessPoolExecutor

from .engine import run_simulation
from .metrics import result_rows
from .model import PAPER_NODE_COUNTS, PAPER_PACKET_SIZES, ConfigError, Protocol, SimConfig, validate_config

CSV_COLUMNS = (
    "protocol", "nodes", "packet_size", "seed", "msg_id", "delivered",
    "transmissions", "nodes_covered", "h_hops", "h_distance_m", "t_min_s",
    "pd_paper", "delay_measured_s",
)
CSV_HEADER = ",".join(CSV_COLUMNS)
INT_COLUMNS = ("nodes", "packet_size", "seed", "msg_id", "transmissions", "nodes_covered", "h_hops")
FLOAT_COLUMNS = ("h_distance_m", "t_min_s", "pd_paper", "delay_measured_s")

PAPER_PROTOCOLS = (Protocol.NORMAL, Protocol.SSF)
PAPER_SEEDS = tuple(range(1, 21))


def sim_threads() -> int:
    """Worker cap from ``SIM_THREADS``, defaulting to the CPU count."""
    raw = os.environ.get("SIM_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError([f"SIM_THREADS: expected a positive integer, got {raw!r}"])
    return n


def format_value(col: str, v) -> str:
    if v is None:
        return ""
    if col == "delivered":
        return "1" if v else "0"
    if col in FLOAT_COLUMNS:
        return f"{v:.6f}"
    return str(v)


def format_rows(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row in rows:
        buf.write(",".join(format_value(c, row[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def parse_csv(text: str) -> list:
    """Read a results CSV back into typed row dicts."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError("not a results CSV: header mismatch")
    rows = []
    for k, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ValueError(f"line {k}: expected {len(CSV_COLUMNS)} fields, got {len(cells)}")
        row = {}
        try:
            for col, cell in zip(CSV_COLUMNS, cells):
                if cell == "":
                    row[col] = None
                elif col == "delivered":
                    if cell not in ("0", "1"):
                        raise ValueError(cell)
                    row[col] = cell == "1"
                elif col in INT_COLUMNS:
                    row[col] = int(cell)
                elif col in FLOAT_COLUMNS:
                    row[col] = float(cell)
                else:
                    row[col] = cell
        except ValueError:
            raise ValueError(f"line {k}: bad value in column {col!r}") from None
        rows.append(row)
    return rows


def _run_group(configs) -> list:
    # configs differing only in packet size share one trajectory
    result = run_simulation(configs[0])
    return [result_rows(result.at_packet_size(c.packet_size)) for c in configs]


def _groups(configs) -> list:
    """Indices of ``configs`` grouped by everything except packet size."""
    by_key = {}
    for k, cfg in enumerate(configs):
        by_key.setdefault(cfg.replace(packet_size=1), []).append(k)
    return list(by_key.values())


def run_configs(configs, threads=None) -> list:
    """Run every config and return the concatenated rows, in input order."""
    configs = list(configs)
    for cfg in configs:
        problems = validate_config(cfg)
        if problems:
            raise ConfigError(problems)
    threads = sim_threads() if threads is None else threads
    groups = _groups(configs)
    jobs = [[configs[k] for k in g] for g in groups]
    if threads <= 1 or len(jobs) <= 1:
        done = [_run_group(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            done = list(pool.map(_run_group, jobs, chunksize=1))
    chunks = [None] * len(configs)
    for g, rows in zip(groups, done):
        for k, r in zip(g, rows):
            chunks[k] = r
    return [row for chunk in chunks for row in chunk]


def batch_configs(scenario: SimConfig, seeds, protocols) -> list:
    protocols = sorted({Protocol(p) for p in protocols}, key=lambda p: p.value)
    return [scenario.replace(protocol=p, seed=s) for p in protocols for s in sorted(set(seeds))]


def run_batch(scenario: SimConfig, seeds, protocols, threads=None) -> str:
    """Cross product of ``protocols`` x ``seeds`` as results-CSV text.

    Every derived config is validated before the first run starts.
    """
    rows = run_configs(batch_configs(scenario, seeds, protocols), threads)
    return format_rows(rows)


def paper_config(nodes: int, packet_size: int, protocol, dead_ends: bool, seed: int,
                 base: SimConfig | None = None) -> SimConfig:
    """One cell of the ``sweep-paper`` grid.

    ``nodes // 5`` messages between disjoint pairs (2i, 2i+1), all created at
    slot 0. With dead ends, the highest-numbered tenth of the nodes fail one
    per 10 slots starting at slot 10; those nodes are never endpoints.
    """
    base = base or SimConfig()
    k = max(1, nodes // 5)
    traffic = tuple((2 * i, 2 * i + 1, 0) for i in range(k))
    failures = tuple((nodes - 1 - i, 10 * (i + 1)) for i in range(nodes // 10)) if dead_ends else ()
    return base.replace(num_nodes=nodes, packet_size=packet_size, protocol=Protocol(protocol),
                        traffic=traffic, failures=failures, seed=seed)


def paper_grid(seeds=PAPER_SEEDS, dead_ends=(False, True), nodes=PAPER_NODE_COUNTS,
               packet_sizes=PAPER_PACKET_SIZES, protocols=PAPER_PROTOCOLS, base=None) -> dict:
    """Configs of the ``sweep-paper`` grid, keyed by the dead-end setting.

    Within each setting the order is (protocol, nodes, packet_size, seed).
    """
    out = {}
    for de in dead_ends:
        out[de] = [paper_config(n, ps, p, de, s, base)
                   for p in sorted(protocols, key=lambda p: Protocol(p).value)
                   for n in nodes for ps in packet_sizes for s in seeds]
    return out
