"""Command line: ``run``, ``summarize`` and ``sweep-paper``.

Exit status is 0 on success, 1 on a configuration or usage error and 2 on an
I/O error; diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import time

from .batch import PAPER_SEEDS, format_rows, paper_grid, parse_csv, run_batch, run_configs
from .metrics import METRIC_COLUMNS, aggregate
from .model import ConfigError, Protocol
from .scenario import parse_scenario

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2

SWEEP_FILES = {False: "paper_no_deadends.csv", True: "paper_deadends.csv"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_seeds(text: str) -> list:
    """``a..b`` (inclusive), a single seed, or a comma list of either."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\.\.(\d+)", part)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if b < a:
                raise UsageError(f"--seeds: empty range {part!r}")
            seeds.extend(range(a, b + 1))
        elif re.fullmatch(r"\d+", part):
            seeds.append(int(part))
        else:
            raise UsageError(f"--seeds: expected a..b, got {part!r}")
    return seeds


def parse_protocols(text: str) -> list:
    out = []
    for name in filter(None, (s.strip() for s in text.split(","))):
        try:
            out.append(Protocol(name))
        except ValueError:
            raise UsageError(f"--protocols: unknown protocol {name!r}") from None
    if not out:
        raise UsageError("--protocols: empty list")
    return out


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def format_table(summary, keys, stat="mean") -> str:
    cols = list(keys) + ["runs", "messages", "delivery_ratio"] + [f"{c}_{stat}" for c in METRIC_COLUMNS]
    cells = [cols] + [[_fmt(row[c]) for c in cols] for row in summary]
    widths = [max(len(r[i]) for r in cells) for i in range(len(cols))]
    lines = []
    for r in cells:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    # flag errors are reported before touching the filesystem
    seeds = parse_seeds(args.seeds) if args.seeds else None
    protocols = parse_protocols(args.protocols) if args.protocols else None
    with open(args.scenario) as fh:
        text = fh.read()
    cfg = parse_scenario(text)
    seeds = seeds or [cfg.seed]
    protocols = protocols or [cfg.protocol]
    _write(args.out, run_batch(cfg, seeds, protocols))
    return EXIT_OK


def cmd_summarize(args) -> int:
    with open(args.csv) as fh:
        text = fh.read()
    try:
        rows = parse_csv(text)
    except ValueError as e:
        raise ConfigError([f"{args.csv}: {e}"]) from None
    if not rows:
        raise ConfigError([f"{args.csv}: no data rows"])
    keys = ("protocol", "nodes", "packet_size") if args.by is None else ("protocol", args.by)
    sys.stdout.write(format_table(aggregate(rows, by=keys), keys, args.stat))
    return EXIT_OK


def cmd_sweep(args) -> int:
    seeds = parse_seeds(args.seeds) if args.seeds else list(PAPER_SEEDS)
    os.makedirs(args.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    for dead_ends, configs in paper_grid(seeds=seeds).items():
        path = os.path.join(args.out_dir, SWEEP_FILES[dead_ends])
        _write(path, format_rows(run_configs(configs)))
        print(f"wrote {path} ({len(configs)} runs)", file=sys.stderr)
    print(f"sweep finished in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ssfsim", description="Slotted DTN routing simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario over seeds and protocols")
    r.add_argument("scenario")
    r.add_argument("--seeds", help="inclusive range a..b (default: the scenario seed)")
    r.add_argument("--protocols", help="comma list (default: the scenario protocol)")
    r.add_argument("--out", help="CSV path (default: stdout)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="aggregate a results CSV")
    s.add_argument("csv")
    s.add_argument("--by", choices=("nodes", "packet_size"))
    s.add_argument("--stat", choices=("mean", "median", "p95"), default="mean")
    s.set_defaults(func=cmd_summarize)

    w = sub.add_parser("sweep-paper", help="nodes x packet size x {normal, ssf} x dead ends")
    w.add_argument("--seeds", help="inclusive range a..b (default: 1..20)")
    w.add_argument("--out-dir", default=".", help="directory for the two CSV files")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"ssfsim: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        for v in e.violations:
            print(f"ssfsim: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"ssfsim: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
