"""TSOR solver: branch and bound on the linearized model."""

from __future__ import annotations

import numpy as np

from .bnb import branch_and_bound
from .instance import (BEST_EFFORT, Infeasible, TsorSolution, class_loads,
                       normalize_idle_gates, objective_value, path_latency)
from .linearize import build_model

# nested relaxations used to name the constraint family behind infeasibility
_STAGES = (
    ("capacity", {"assignment", "capacity", "preassignment"}),
    ("gate_congestion", {"assignment", "capacity", "preassignment", "gate_sum", "gate_congestion"}),
)


def diagnose(inst, max_nodes=100000):
    """Name the first constraint family that makes ``inst`` infeasible."""
    for family, fams in _STAGES:
        model = build_model(inst, fams, objective=False)
        if branch_and_bound(model, max_nodes=max_nodes, first_feasible=True).x is None:
            return family
    return "latency"


def _polish_gates(inst, assignment, raw):
    loads = class_loads(inst, assignment)
    gates = {}
    for e in inst.links:
        vals = {s: min(1.0, max(0.0, raw[(e, s)], loads.get((e, s), 0.0))) for s in inst.classes}
        excess = sum(vals.values()) - 1.0
        if excess != 0.0:
            # absorb rounding on classes that carry no load here, BE first
            order = sorted(inst.classes, key=lambda s: ((e, s) in loads, s != BEST_EFFORT, s))
            for s in order:
                floor = loads.get((e, s), 0.0)
                if excess > 0:
                    step = min(excess, vals[s] - floor)
                else:
                    step = max(excess, vals[s] - 1.0)
                vals[s] -= step
                excess -= step
                if excess == 0.0:
                    break
        for s, v in vals.items():
            gates[(e, s)] = v
    return normalize_idle_gates(inst, assignment, gates)


def solve(inst, gap=1e-6, max_nodes=100000):
    """Optimal path choice and gate split for every demand.

    Raises :class:`Infeasible` naming the violated constraint family.
    """
    model = build_model(inst)
    res = branch_and_bound(model, gap=gap, max_nodes=max_nodes)
    if res.x is None:
        raise Infeasible(diagnose(inst, max_nodes))
    x = res.x
    assignment = {}
    for d in inst.demands:
        vals = [x[model.x_index[(d.id, p)]] for p in range(len(inst.paths[d.id]))]
        assignment[d.id] = int(np.argmax(vals))
    raw = {key: float(x[j]) for key, j in model.g_index.items()}
    gates = _polish_gates(inst, assignment, raw)
    return TsorSolution(assignment, gates, objective_value(inst, assignment, gates))


def verify_solution(inst, sol):
    """Largest violation per constraint family (0.0 means satisfied).

    Capacity and congestion residuals are in units of link capacity; the
    ``objective`` entry is the gap between the reported and recomputed cost.
    """
    res = {f: 0.0 for f in ("assignment", "capacity", "gate_sum", "latency",
                             "gate_congestion", "preassignment", "objective")}
    for d in inst.demands:
        p = sol.assignment.get(d.id)
        if p is None or not 0 <= p < len(inst.paths[d.id]):
            res["assignment"] = 1.0
    if res["assignment"]:
        return res
    loads = class_loads(inst, sol.assignment)
    per_link = {}
    for (e, _), u in loads.items():
        per_link[e] = per_link.get(e, 0.0) + u
    for e, u in per_link.items():
        res["capacity"] = max(res["capacity"], u - 1.0)
    for e in inst.links:
        total = 0.0
        for s in inst.classes:
            g = sol.gates[(e, s)]
            total += g
            res["gate_sum"] = max(res["gate_sum"], -g, g - 1.0)
            res["gate_congestion"] = max(res["gate_congestion"], loads.get((e, s), 0.0) - g)
        res["gate_sum"] = max(res["gate_sum"], abs(total - 1.0))
    for d in inst.demands:
        lat = path_latency(inst, d, inst.paths[d.id][sol.assignment[d.id]], sol.gates)
        res["latency"] = max(res["latency"], lat - d.latency_bound)
    for did, p in inst.preassigned.items():
        if sol.assignment[did] != p:
            res["preassignment"] = 1.0
    res["objective"] = abs(sol.objective - objective_value(inst, sol.assignment, sol.gates))
    return {k: max(0.0, v) for k, v in res.items()}
