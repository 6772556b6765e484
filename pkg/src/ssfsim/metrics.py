"""Per-message metrics and cross-run aggregation.

Packet delay follows ``PD = PS / H * T`` read left to right, with H the hop
count of the first delivery path and T the first-delivery time in seconds.
Two distances are kept apart: ``h_hops`` (path hop count) and ``h_distance``
(euclidean source to destination distance at creation, meters).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass
from typing import Optional

METRIC_COLUMNS = (
    "transmissions", "nodes_covered", "h_hops", "h_distance_m",
    "t_min_s", "pd_paper", "delay_measured_s",
)


@dataclass(frozen=True)
class MetricsReport:
    msg_id: int
    delivered: bool
    transmissions: int
    nodes_covered: int
    h_distance: float
    delay_measured: float
    h_hops: Optional[int] = None
    t_min: Optional[float] = None
    pd_paper: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def packet_delay(ps: float, h: int, t: float) -> float:
    if h <= 0:
        raise ValueError("hop count must be >= 1 for a packet delay")
    return ps / h * t


def transmission_rate(report: MetricsReport) -> int:
    """Number of distinct nodes that ever held a copy, destination included."""
    return report.nodes_covered


def hop_distance(report: MetricsReport) -> tuple:
    return report.h_hops, report.h_distance


def build_report(st, horizon_slot: int, slot_duration: float) -> MetricsReport:
    msg = st.message
    created = msg.created_at.slot
    if st.delivered_slot is None:
        # right-censored at the horizon
        return MetricsReport(
            msg_id=msg.msg_id, delivered=False, transmissions=st.transmissions,
            nodes_covered=len(st.covered), h_distance=st.h_distance,
            delay_measured=(horizon_slot - created) * slot_duration,
        )
    hops = len(st.delivery_path) - 1
    # the delivering send occupies its slot, so one-hop delivery takes one slot
    t_min = (st.delivered_slot - created + 1) * slot_duration
    return MetricsReport(
        msg_id=msg.msg_id, delivered=True, transmissions=st.transmissions,
        nodes_covered=len(st.covered), h_distance=st.h_distance,
        delay_measured=t_min, h_hops=hops, t_min=t_min,
        pd_paper=packet_delay(msg.packet_size, hops, t_min),
    )


def result_rows(result) -> list:
    """Flatten a RunResult into one plain row per message (CSV column names)."""
    cfg = result.config
    rows = []
    for r in result.reports:
        rows.append({
            "protocol": cfg.protocol.value,
            "nodes": cfg.num_nodes,
            "packet_size": cfg.packet_size,
            "seed": result.seed,
            "msg_id": r.msg_id,
            "delivered": r.delivered,
            "transmissions": r.transmissions,
            "nodes_covered": r.nodes_covered,
            "h_hops": r.h_hops,
            "h_distance_m": r.h_distance,
            "t_min_s": r.t_min,
            "pd_paper": r.pd_paper,
            "delay_measured_s": r.delay_measured,
        })
    return rows


def percentile(sorted_values, q: float) -> float:
    """Linear-interpolation percentile of an already sorted sequence."""
    if not sorted_values:
        return math.nan
    pos = (len(sorted_values) - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = pos - lo
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


def _stats(values) -> dict:
    vals = sorted(v for v in values if v is not None)
    if not vals:
        return {"mean": None, "median": None, "p95": None}
    return {
        "mean": math.fsum(vals) / len(vals),
        "median": statistics.median(vals),
        "p95": percentile(vals, 95),
    }


def aggregate(results, by=("protocol", "nodes", "packet_size")) -> list:
    """Summarise runs (RunResults or CSV-style rows) per group key.

    Each summary row carries the group key, ``runs`` (distinct seeds),
    ``messages``, ``delivery_ratio`` and mean/median/p95 of every metric
    column over the messages where that metric is present.
    """
    rows = []
    for item in results:
        rows.extend(item if isinstance(item, list) else
                    [item] if isinstance(item, dict) else result_rows(item))
    if not rows:
        raise ValueError("nothing to aggregate")
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in by), []).append(row)
    summary = []
    for key in sorted(groups):
        grp = groups[key]
        out = dict(zip(by, key))
        out["runs"] = len({row["seed"] for row in grp})
        out["messages"] = len(grp)
        out["delivery_ratio"] = sum(1 for row in grp if row["delivered"]) / len(grp)
        for col in METRIC_COLUMNS:
            for stat, v in _stats(row[col] for row in grp).items():
                out[f"{col}_{stat}"] = v
        summary.append(out)
    return summary
