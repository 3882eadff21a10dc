"""Discrete-event MANET simulator comparing AODV with a realtime-priority variant (EAODV)."""

from .harness import compare, run, simulate
from .scenario import Protocol, Scenario, load_scenario, parse_scenario

__all__ = ["Scenario", "Protocol", "load_scenario", "parse_scenario", "run", "compare",
           "simulate"]
__version__ = "0.1.0"
