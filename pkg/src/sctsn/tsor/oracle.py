"""Reference TSOR solver for small instances.

Enumerates every path combination and, for each one that fits the link
capacities and admits a gate split, solves the remaining linear program
over the gates with a small dense simplex written here. It shares no
solver code with :mod:`.solve` so the two can check each other.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from .instance import (BEST_EFFORT, Infeasible, TsorSolution, class_loads,
                       normalize_idle_gates, objective_value)

MAX_DEMANDS = 6
MAX_COMBINATIONS = 4096
EPS = 1e-10


def simplex_max(c, A_ub, b_ub, A_ge=(), b_ge=()):
    """Maximize ``c.y`` s.t. ``A_ub y <= b_ub``, ``A_ge y >= b_ge``, ``y >= 0``.

    Two-phase tableau method with Bland's rule. Returns ``(value, y)`` or
    ``None`` when infeasible. The problems handled here are bounded.
    """
    n = len(c)
    rows, rhs, kinds = [], [], []
    for a, b in zip(A_ub, b_ub):
        rows.append(list(a))
        rhs.append(b)
        kinds.append("le")
    for a, b in zip(A_ge, b_ge):
        rows.append(list(a))
        rhs.append(b)
        kinds.append("ge")
    m = len(rows)
    # normalize to nonnegative right-hand sides
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
            kinds[i] = "ge" if kinds[i] == "le" else "le"
    n_slack = m
    art = [i for i in range(m) if kinds[i] == "ge"]
    width = n + n_slack + len(art)
    T = []
    basis = []
    for i in range(m):
        row = rows[i] + [0.0] * (n_slack + len(art)) + [rhs[i]]
        row[n + i] = 1.0 if kinds[i] == "le" else -1.0
        if kinds[i] == "ge":
            a = n + n_slack + art.index(i)
            row[a] = 1.0
            basis.append(a)
        else:
            basis.append(n + i)
        T.append(row)

    def pivot(r, col):
        pv = T[r][col]
        T[r] = [v / pv for v in T[r]]
        for i in range(m):
            if i != r and T[i][col] != 0.0:
                f = T[i][col]
                T[i] = [a - f * b for a, b in zip(T[i], T[r])]
        basis[r] = col

    def run(cost, allowed):
        # minimize cost over the tableau; cost has length ``width``
        while True:
            red = []
            for j in range(width):
                if j not in allowed:
                    red.append(0.0)
                    continue
                red.append(cost[j] - sum(cost[basis[i]] * T[i][j] for i in range(m)))
            enter = next((j for j in range(width) if j in allowed and red[j] < -EPS), None)
            if enter is None:
                return
            best, leave = None, None
            for i in range(m):
                if T[i][enter] > EPS:
                    ratio = T[i][-1] / T[i][enter]
                    if best is None or ratio < best - EPS or (abs(ratio - best) <= EPS and basis[i] < basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                raise ArithmeticError("unbounded linear program")
            pivot(leave, enter)

    everything = set(range(width))
    if art:
        cost1 = [0.0] * width
        for i in art:
            cost1[n + n_slack + art.index(i)] = 1.0
        run(cost1, everything)
        infeas = sum(T[i][-1] for i in range(m) if basis[i] >= n + n_slack)
        if infeas > 1e-9:
            return None
        # drive zero-valued artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= n + n_slack:
                col = next((j for j in range(n + n_slack) if abs(T[i][j]) > EPS), None)
                if col is not None:
                    pivot(i, col)
    allowed = set(range(n + n_slack))
    cost2 = [-v for v in c] + [0.0] * (n_slack + len(art))
    run(cost2, allowed)
    y = [0.0] * n
    for i in range(m):
        if basis[i] < n:
            y[basis[i]] = T[i][-1]
    return sum(ci * yi for ci, yi in zip(c, y)), y


def _gate_lp(inst, assignment):
    """Best gate split for a fixed assignment, or None if latency fails.

    Variables are the extra share ``y = g - L`` granted to each loaded
    (link, class) pair above its load ``L``.
    """
    loads = class_loads(inst, assignment)
    keys = sorted(loads)
    col = {k: i for i, k in enumerate(keys)}
    n = len(keys)
    c = [0.0] * n
    for d in inst.demands:
        for e in inst.paths[d.id][assignment[d.id]]:
            c[col[(e, d.cls)]] += inst.links[e].queue_factor
    A_ub, b_ub = [], []
    A_ge, b_ge = [], []
    links = sorted({e for e, _ in keys})
    for e in links:
        row = [0.0] * n
        total = 0.0
        active = 0
        for s in inst.classes:
            if (e, s) in loads:
                row[col[(e, s)]] = 1.0
                total += loads[(e, s)]
                active += 1
        A_ub.append(row)
        b_ub.append(1.0 - total)
        if active == len(inst.classes):
            A_ge.append(row)
            b_ge.append(1.0 - total)
    for d in inst.demands:
        path = inst.paths[d.id][assignment[d.id]]
        row = [0.0] * n
        base = 0.0
        for e in path:
            lk = inst.links[e]
            row[col[(e, d.cls)]] += lk.queue_factor
            base += lk.base_delay + lk.queue_factor * (1.0 - loads[(e, d.cls)])
        # base - sum(lq * y) <= bound
        A_ge.append(row)
        b_ge.append(base - d.latency_bound)
    out = simplex_max(c, A_ub, b_ub, A_ge, b_ge)
    if out is None:
        return None
    _, y = out
    gates = {}
    for e in inst.links:
        for s in inst.classes:
            gates[(e, s)] = 0.0
    for e in links:
        used = 0.0
        for s in inst.classes:
            if (e, s) in loads:
                gates[(e, s)] = loads[(e, s)] + y[col[(e, s)]]
                used += gates[(e, s)]
        rest = [s for s in inst.classes if (e, s) not in loads]
        if rest:
            target = BEST_EFFORT if BEST_EFFORT in rest else rest[0]
            gates[(e, target)] = max(0.0, 1.0 - used)
    return gates


def brute_force_solve(inst):
    """Exhaustive optimum; raises :class:`Infeasible` like :func:`solve`."""
    sizes = [len(inst.paths[d.id]) for d in inst.demands]
    combos = 1
    for s in sizes:
        combos *= s
    if len(inst.demands) > MAX_DEMANDS or combos > MAX_COMBINATIONS:
        raise ValueError("instance too large for exhaustive search")
    choices = []
    for d in inst.demands:
        if d.id in inst.preassigned:
            choices.append([inst.preassigned[d.id]])
        else:
            choices.append(range(len(inst.paths[d.id])))
    best = None
    any_cap = any_gate = False
    for combo in itertools.product(*choices):
        assignment = {d.id: p for d, p in zip(inst.demands, combo)}
        loads = class_loads(inst, assignment)
        per_link, per_link_exact = {}, {}
        for (e, _), u in loads.items():
            per_link[e] = per_link.get(e, 0.0) + u
        # exact rational check so boundary cases are decided without rounding
        for d in inst.demands:
            for e in inst.paths[d.id][assignment[d.id]]:
                per_link_exact[e] = per_link_exact.get(e, 0) + Fraction(d.load)
        if any(v > Fraction(inst.links[e].capacity) for e, v in per_link_exact.items()):
            continue
        any_cap = True
        if any(u > 1.0 + 1e-12 for u in per_link.values()):
            continue
        any_gate = True
        gates = _gate_lp(inst, assignment)
        if gates is None:
            continue
        gates = normalize_idle_gates(inst, assignment, gates)
        val = objective_value(inst, assignment, gates)
        if best is None or val < best.objective - 1e-12:
            best = TsorSolution(assignment, gates, val)
    if best is None:
        if not any_cap:
            raise Infeasible("capacity")
        if not any_gate:
            raise Infeasible("gate_congestion")
        raise Infeasible("latency")
    return best
