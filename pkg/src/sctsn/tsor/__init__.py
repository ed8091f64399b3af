"""Time-sensitive optimal routing: instance model, MILP solver and oracle."""

from .instance import (BEST_EFFORT, CLASSES, TT_CLASS, Infeasible, InstanceError,
                       LinkParams, TsorInstance, TsorSolution, build_instance,
                       class_loads, default_latency_bound, format_instance,
                       objective_value, parse_instance, solution_csv, switch_path)
from .oracle import brute_force_solve
from .solve import diagnose, solve, verify_solution

__all__ = [
    "BEST_EFFORT", "CLASSES", "TT_CLASS", "Infeasible", "InstanceError", "LinkParams",
    "TsorInstance", "TsorSolution", "brute_force_solve", "build_instance", "class_loads",
    "default_latency_bound", "diagnose", "format_instance", "objective_value",
    "parse_instance", "solution_csv", "solve", "switch_path", "verify_solution",
]
