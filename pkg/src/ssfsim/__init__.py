"""Slotted simulator of sparse mobile ad-hoc networks with multi-copy routing."""

from .batch import run_batch
from .engine import RunResult, run_simulation, spacetime_reachable
from .metrics import aggregate, packet_delay
from .model import ConfigError, Phase, Protocol, SimConfig, validate_config
from .scenario import ScenarioError, emit_scenario, parse_scenario

__all__ = [
    "ConfigError", "Phase", "Protocol", "RunResult", "ScenarioError", "SimConfig",
    "aggregate", "emit_scenario", "packet_delay", "parse_scenario", "run_batch",
    "run_simulation", "spacetime_reachable", "validate_config",
]
__version__ = "0.1.0"
