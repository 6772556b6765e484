"""Plain-text scenario files: ``key=value`` lines, ``#`` comments.

Absent keys take the :class:`SimConfig` defaults::

    nodes=50          area_w=1000     area_h=1000    range=100
    slot_s=1          max_slots=5000  vmin=0.5       vmax=2
    L=4               packet_size=10  protocol=ssf   contention=on
    failures=         traffic=        seed=0

``failures`` is a ``;`` list of ``node@slot`` and ``traffic`` a ``;`` list of
``src>dst@slot``.
"""

from __future__ import annotations

import math
import re

from .model import ConfigError, Protocol, SimConfig, validate_config

_DEFAULT = SimConfig()

# key -> (SimConfig field, kind)
KEYS = {
    "nodes": ("num_nodes", "int"),
    "area_w": ("area", "float"),
    "area_h": ("area", "float"),
    "range": ("tx_range", "float"),
    "slot_s": ("slot_duration", "float"),
    "max_slots": ("max_slots", "int"),
    "vmin": ("v_min", "float"),
    "vmax": ("v_max", "float"),
    "L": ("copy_budget_L", "int"),
    "packet_size": ("packet_size", "int"),
    "protocol": ("protocol", "protocol"),
    "contention": ("contention_enabled", "switch"),
    "failures": ("failures", "failures"),
    "traffic": ("traffic", "traffic"),
    "seed": ("seed", "int"),
}

# validate_config names fields, not keys
_FIELD_KEY = {
    "num_nodes": "nodes", "tx_range": "range", "slot_duration": "slot_s",
    "max_slots": "max_slots", "v_min": "vmin", "v_max": "vmax",
    "copy_budget_L": "L", "packet_size": "packet_size", "seed": "seed",
    "failures": "failures", "traffic": "traffic", "area": "area_w",
}

_INT = re.compile(r"[+-]?\d+")
_FAIL = re.compile(r"(\d+)@(\d+)")
_FLOW = re.compile(r"(\d+)>(\d+)@(\d+)")


class ScenarioError(ConfigError):
    """A scenario that cannot be turned into a runnable config.

    ``line`` is 1-based, or ``None`` when the offending key was left at its default.
    """

    def __init__(self, line, key, reason):
        self.line, self.key, self.reason = line, key, reason
        where = f"line {line}: " if line is not None else ""
        super().__init__([f"{where}{key}: {reason}"])


def _value(key, kind, raw, line):
    def bad(why):
        return ScenarioError(line, key, why)

    if kind == "int":
        if not _INT.fullmatch(raw):
            raise bad(f"expected an integer, got {raw!r}")
        return int(raw)
    if kind == "float":
        try:
            v = float(raw)
        except ValueError:
            raise bad(f"expected a number, got {raw!r}") from None
        if not math.isfinite(v):
            raise bad("must be finite")
        return v
    if kind == "protocol":
        try:
            return Protocol(raw)
        except ValueError:
            names = ", ".join(p.value for p in Protocol)
            raise bad(f"unknown protocol {raw!r} (expected one of {names})") from None
    if kind == "switch":
        if raw not in ("on", "off"):
            raise bad(f"expected on or off, got {raw!r}")
        return raw == "on"
    pattern = _FAIL if kind == "failures" else _FLOW
    items = []
    for part in filter(None, (p.strip() for p in raw.split(";"))):
        m = pattern.fullmatch(part)
        if m is None:
            shape = "node@slot" if kind == "failures" else "src>dst@slot"
            raise bad(f"malformed entry {part!r}, expected {shape}")
        items.append(tuple(int(g) for g in m.groups()))
    return tuple(items)


def parse_scenario(text: str) -> SimConfig:
    """Parse scenario text into a validated :class:`SimConfig`.

    Raises :class:`ScenarioError` naming the line and key of the first problem.
    """
    seen = {}
    fields = {}
    area = list(_DEFAULT.area)
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(lineno, line, "malformed line, expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ScenarioError(lineno, key, "unknown key")
        if key in seen:
            raise ScenarioError(lineno, key, f"duplicate key (first set on line {seen[key]})")
        seen[key] = lineno
        field, kind = KEYS[key]
        v = _value(key, kind, raw, lineno)
        if key == "area_w":
            area[0] = v
        elif key == "area_h":
            area[1] = v
        else:
            fields[field] = v
    cfg = SimConfig(area=tuple(area), **fields)
    problems = validate_config(cfg)
    if problems:
        first = problems[0]
        field = re.match(r"[a-z_A-Z]+", first).group(0)
        key = _FIELD_KEY.get(field, field)
        if field == "area" and "area_w" not in seen:
            key = "area_h"
        reason = first.split(": ", 1)[1] if ": " in first else first
        if "[" in first.split(":")[0]:
            reason = first  # keep the entry index
        raise ScenarioError(seen.get(key), key, reason)
    return cfg


def _num(v: float) -> str:
    return repr(float(v))


def emit_scenario(config: SimConfig) -> str:
    """Render ``config`` as scenario text that parses back to an equal config."""
    c = config
    lines = [
        f"nodes={c.num_nodes}",
        f"area_w={_num(c.area[0])}",
        f"area_h={_num(c.area[1])}",
        f"range={_num(c.tx_range)}",
        f"slot_s={_num(c.slot_duration)}",
        f"max_slots={c.max_slots}",
        f"vmin={_num(c.v_min)}",
        f"vmax={_num(c.v_max)}",
        f"L={c.copy_budget_L}",
        f"packet_size={c.packet_size}",
        f"protocol={c.protocol.value}",
        f"contention={'on' if c.contention_enabled else 'off'}",
        "failures=" + ";".join(f"{n}@{s}" for n, s in c.failures),
        "traffic=" + ";".join(f"{a}>{b}@{s}" for a, b, s in c.traffic),
        f"seed={c.seed}",
    ]
    return "\n".join(lines) + "\n"
