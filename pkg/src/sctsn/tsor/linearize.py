"""Mixed-integer linear form of the TSOR problem.

The latency of a selected path contains the product ``x[d,p] * g[e,s_d]``.
Each such product gets its own variable ``z`` with the four McCormick
inequalities, which are exact whenever ``x`` is binary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

ALL_FAMILIES = frozenset({"assignment", "capacity", "gate_sum", "latency",
                          "gate_congestion", "preassignment"})


@dataclass
class LinearModel:
    c: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    x_index: dict      # (demand id, path index) -> column
    g_index: dict      # (link id, class) -> column
    z_index: dict      # (demand id, path index, link id) -> column
    x_order: list      # branching order of x columns
    row_family: list   # family name of each A_ub row

    @property
    def n(self):
        return self.c.size


class _Rows:
    def __init__(self):
        self.r, self.c, self.v, self.b, self.tag = [], [], [], [], []

    def add(self, coeffs, rhs, tag=""):
        i = len(self.b)
        for col, val in coeffs:
            self.r.append(i)
            self.c.append(col)
            self.v.append(val)
        self.b.append(rhs)
        self.tag.append(tag)

    def matrix(self, n):
        m = sparse.csr_matrix((self.v, (self.r, self.c)), shape=(len(self.b), n))
        return m, np.asarray(self.b, dtype=float)


def build_model(inst, families=ALL_FAMILIES, objective=True):
    """Build the linear model restricted to the given constraint families."""
    families = frozenset(families)
    x_index, g_index, z_index = {}, {}, {}
    col = 0
    for d in inst.demands:
        for p in range(len(inst.paths[d.id])):
            x_index[(d.id, p)] = col
            col += 1
    for e in inst.links:
        for s in inst.classes:
            g_index[(e, s)] = col
            col += 1
    need_z = objective or "latency" in families
    if need_z:
        for d in inst.demands:
            for p, links in enumerate(inst.paths[d.id]):
                for e in links:
                    z_index[(d.id, p, e)] = col
                    col += 1
    n = col
    c = np.zeros(n)
    lb = np.zeros(n)
    ub = np.ones(n)

    if objective:
        for d in inst.demands:
            for p, links in enumerate(inst.paths[d.id]):
                for e in links:
                    lk = inst.links[e]
                    c[x_index[(d.id, p)]] += lk.base_delay + lk.queue_factor
                    c[z_index[(d.id, p, e)]] -= lk.queue_factor

    ub_rows, eq_rows = _Rows(), _Rows()
    if "assignment" in families:
        for d in inst.demands:
            eq_rows.add([(x_index[(d.id, p)], 1.0) for p in range(len(inst.paths[d.id]))],
                        1.0, "assignment")
    if "preassignment" in families:
        for did, p in inst.preassigned.items():
            lb[x_index[(did, p)]] = 1.0
    if "gate_sum" in families:
        for e in inst.links:
            eq_rows.add([(g_index[(e, s)], 1.0) for s in inst.classes], 1.0, "gate_sum")

    use = {}  # link -> list of (demand, path)
    for d in inst.demands:
        for p, links in enumerate(inst.paths[d.id]):
            for e in links:
                use.setdefault(e, []).append((d, p))

    if "capacity" in families:
        for e, users in use.items():
            cap = inst.links[e].capacity
            ub_rows.add([(x_index[(d.id, p)], d.load / cap) for d, p in users], 1.0, "capacity")
    if "gate_congestion" in families:
        for e, users in use.items():
            cap = inst.links[e].capacity
            by_cls = {}
            for d, p in users:
                by_cls.setdefault(d.cls, []).append((x_index[(d.id, p)], d.load / cap))
            for s, coeffs in sorted(by_cls.items()):
                ub_rows.add(coeffs + [(g_index[(e, s)], -1.0)], 0.0, "gate_congestion")
    if "latency" in families:
        for d in inst.demands:
            coeffs = []
            for p, links in enumerate(inst.paths[d.id]):
                for e in links:
                    lk = inst.links[e]
                    coeffs.append((x_index[(d.id, p)], lk.base_delay + lk.queue_factor))
                    coeffs.append((z_index[(d.id, p, e)], -lk.queue_factor))
            ub_rows.add(coeffs, d.latency_bound, "latency")
    for (did, p, e), zc in z_index.items():
        xc = x_index[(did, p)]
        gc = g_index[(e, _cls_of(inst, did))]
        ub_rows.add([(zc, 1.0), (xc, -1.0)], 0.0, "mccormick")
        ub_rows.add([(zc, 1.0), (gc, -1.0)], 0.0, "mccormick")
        ub_rows.add([(gc, 1.0), (xc, 1.0), (zc, -1.0)], 1.0, "mccormick")

    A_ub, b_ub = ub_rows.matrix(n)
    A_eq, b_eq = eq_rows.matrix(n)
    x_order = [x_index[(d.id, p)] for d in inst.demands for p in range(len(inst.paths[d.id]))]
    return LinearModel(c, A_ub, b_ub, A_eq, b_eq, lb, ub, x_index, g_index, z_index,
                       x_order, ub_rows.tag)


def _cls_of(inst, demand_id):
    for d in inst.demands:
        if d.id == demand_id:
            return d.cls
    raise KeyError(demand_id)
