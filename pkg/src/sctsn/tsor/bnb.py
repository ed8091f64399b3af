"""Depth-first branch and bound over LP relaxations (HiGHS via scipy)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

INT_TOL = 1e-7
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


class NodeLimit(RuntimeError):
    pass


@dataclass
class BnbResult:
    x: np.ndarray | None
    objective: float
    nodes: int


def solve_lp(model, lb, ub):
    res = linprog(model.c, A_ub=model.A_ub if model.A_ub.shape[0] else None,
                  b_ub=model.b_ub if model.A_ub.shape[0] else None,
                  A_eq=model.A_eq if model.A_eq.shape[0] else None,
                  b_eq=model.b_eq if model.A_eq.shape[0] else None,
                  bounds=np.column_stack([lb, ub]), method="highs", options=_LP_OPTIONS)
    if res.status == 0:
        return res.x, float(res.fun)
    if res.status == 2:
        return None, np.inf
    raise RuntimeError(f"LP solver failed: {res.message}")


def branch_and_bound(model, gap=1e-6, max_nodes=100000, first_feasible=False):
    """Minimize ``model`` with its x columns restricted to {0, 1}.

    Branches on the first fractional x in ``model.x_order``, trying the
    up-branch first. Nodes whose bound is within ``gap`` of the incumbent
    are pruned. With ``first_feasible`` the search stops at the first
    integral point (used for feasibility diagnosis).
    """
    best_x, best = None, np.inf
    stack = [(model.lb.copy(), model.ub.copy())]
    nodes = 0
    while stack:
        lb, ub = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise NodeLimit(f"branch and bound exceeded {max_nodes} nodes")
        sol, val = solve_lp(model, lb, ub)
        if sol is None or val >= best - gap:
            continue
        frac = None
        for j in model.x_order:
            if INT_TOL < sol[j] < 1 - INT_TOL:
                frac = j
                break
        if frac is None:
            best_x, best = sol, val
            if first_feasible:
                break
            continue
        down_lb, down_ub = lb.copy(), ub.copy()
        down_ub[frac] = 0.0
        up_lb, up_ub = lb.copy(), ub.copy()
        up_lb[frac] = 1.0
        stack.append((down_lb, down_ub))
        stack.append((up_lb, up_ub))
    return BnbResult(best_x, best, nodes)
