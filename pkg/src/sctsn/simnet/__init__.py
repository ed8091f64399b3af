"""Discrete-event simulation of the self-configuring network and the SRP baseline."""

from .metrics import METRIC_FIELDS, LatencyStats, MetricsReport, compute_metrics
from .port import Frame, Port
from .scenario import (BESpec, ControllerSpec, NetworkSpec, Scenario, ScenarioError, TTSpec,
                       load_scenario, scenario_from_dict)
from .world import SimulationError, World, run

__all__ = [
    "BESpec", "ControllerSpec", "Frame", "LatencyStats", "METRIC_FIELDS", "MetricsReport",
    "NetworkSpec", "Port", "Scenario", "ScenarioError", "SimulationError", "TTSpec", "World",
    "compute_metrics", "load_scenario", "run", "scenario_from_dict",
]
