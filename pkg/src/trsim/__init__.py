"""Tick-based simulator of trusted routing with a VPN-tunnel baseline."""

from .engine import MetricsReport, Simulation, run
from .scenario import Scenario, load_scenario, render_scenario

__all__ = ["MetricsReport", "Scenario", "Simulation", "load_scenario", "render_scenario", "run"]
__version__ = "0.1.0"
