"""Deterministic receiver-centric message mediation engine and simulator."""

from .envelope import Envelope, Urgency, ValidityWindow, is_live, validate
from .sim import Scenario, Simulation, Trace, load_scenario, load_scenario_file, run

__all__ = [
    "Envelope",
    "Scenario",
    "Simulation",
    "Trace",
    "Urgency",
    "ValidityWindow",
    "is_live",
    "load_scenario",
    "load_scenario_file",
    "run",
    "validate",
]

__version__ = "0.1.0"
