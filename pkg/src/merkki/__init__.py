"""Discrete-event simulator and log analysis for a fleet of picture-trading clothing patches."""

from .core import EventKind, EventRecord, Scenario, parse_log, serialize_log, validate_scenario
from .engine import run
from .scenario import bundled_scenario, load_scenario

__all__ = [
    "EventKind",
    "EventRecord",
    "Scenario",
    "bundled_scenario",
    "load_scenario",
    "parse_log",
    "run",
    "serialize_log",
    "validate_scenario",
]
