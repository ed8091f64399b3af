"""Default path computation with utilization-adaptive link weights.

Each statistics period the measured utilization of a link is mapped to a
raw weight, the last three raw weights are averaged (newest weighted
most), and the weight used for routing only moves when the smoothed value
differs from it by more than a relative threshold. Routes are recomputed
only when at least one active weight moved.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

SMOOTHING = (0.5, 0.3, 0.2)


@dataclass(frozen=True)
class WeightMap:
    u_low: float = 0.3
    w_min: float = 1.0
    w_max: float = 10.0

    def __post_init__(self):
        if not 0 <= self.u_low < 1:
            raise ValueError("u_low must lie in [0, 1)")
        if not 0 < self.w_min <= self.w_max:
            raise ValueError("need 0 < w_min <= w_max")


DEFAULT_MAP = WeightMap()


def map_utilization_to_weight(u, wmap=DEFAULT_MAP):
    """Flat at ``w_min`` up to ``u_low``, then linear up to ``w_max`` at u = 1."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"utilization {u} outside [0, 1]")
    if u <= wmap.u_low:
        return wmap.w_min
    return wmap.w_min + (wmap.w_max - wmap.w_min) * (u - wmap.u_low) / (1.0 - wmap.u_low)


def smooth_weight(history, coefficients=SMOOTHING):
    """Weighted average of up to three raw weights given newest first."""
    h = list(history)[:len(coefficients)]
    if not h:
        raise ValueError("empty weight history")
    c = coefficients[:len(h)]
    return sum(ci * wi for ci, wi in zip(c, h)) / sum(c)


def should_update(new, active, threshold=0.2):
    if active <= 0:
        raise ValueError("active weight must be positive")
    return abs(new - active) / active > threshold


@dataclass
class LinkWeightState:
    utilization: float = 0.0
    history: deque = field(default_factory=lambda: deque(maxlen=3))  # newest first
    active: float = DEFAULT_MAP.w_min


@dataclass(frozen=True)
class RoutingUpdate:
    table: dict
    changed: list
    unreachable: list


def _lexicographic_paths(nodes, weights, pairs):
    index = {n: i for i, n in enumerate(nodes)}
    rows, cols, vals = [], [], []
    for (u, v), w in weights.items():
        if w <= 0:
            raise ValueError(f"non-positive weight on {u}->{v}")
        rows.append(index[u])
        cols.append(index[v])
        vals.append(float(w))
    n = len(nodes)
    dist = shortest_path(csr_matrix((vals, (rows, cols)), shape=(n, n)), method="D", directed=True)
    adj = {u: [] for u in nodes}
    for (u, v), w in weights.items():
        adj[u].append((v, w))
    for u in adj:
        adj[u].sort()

    out, missing = {}, []
    for s, d in pairs:
        total = dist[index[s], index[d]]
        if not np.isfinite(total):
            missing.append((s, d))
            continue
        tol = 1e-9 * max(1.0, total)
        path = [s]
        cur, acc = s, 0.0
        while cur != d:
            # smallest neighbour that still lies on some minimum-weight path
            for v, w in adj[cur]:
                if v in path:
                    continue
                if abs(acc + w + dist[index[v], index[d]] - total) <= tol:
                    path.append(v)
                    acc += w
                    cur = v
                    break
            else:  # pragma: no cover - guarded by the distance check
                raise RuntimeError("inconsistent shortest-path distances")
        out[(s, d)] = tuple(path)
    return out, missing


def recompute_default_paths(topo, weights, previous=None, pairs=None):
    """Minimum-weight path per ordered switch pair, ties broken lexicographically.

    ``pairs`` defaults to ordered pairs of edge switches (all switches if
    roles are unassigned). ``changed`` lists pairs whose path differs from
    ``previous``.
    """
    nodes = sorted(topo.nodes)
    if pairs is None:
        members = topo.edge_switches() or nodes
        pairs = [(a, b) for a in members for b in members if a != b]
    w = {key: weights[key] for key in topo.links}
    table, missing = _lexicographic_paths(nodes, w, pairs)
    previous = previous or {}
    changed = sorted(k for k, p in table.items() if previous.get(k) != p)
    return RoutingUpdate(table, changed, missing)


class DefaultPathEngine:
    """Controller-side DPCE: link weight state plus the default routing table.

    :meth:`update` is the statistics tick; it applies all weight changes and
    swaps in the new table in one step so readers never see a partial table.
    """

    def __init__(self, topo, wmap=DEFAULT_MAP, threshold=0.2, initial_weights=None, pairs=None):
        self.topo = topo
        self.wmap = wmap
        self.threshold = threshold
        self.pairs = pairs
        self.state = {key: LinkWeightState(active=wmap.w_min) for key in sorted(topo.links)}
        if initial_weights:
            for key, w in initial_weights.items():
                st = self.state[key]
                st.active = w
                st.history.appendleft(w)
        self.history = []  # (tick, link, utilization, raw, smoothed, active)
        self.tick = 0
        self.route_changes = 0
        update = recompute_default_paths(topo, self.weights(), pairs=pairs)
        self.table = update.table
        self.unreachable = update.unreachable

    def weights(self):
        return {k: s.active for k, s in self.state.items()}

    def path(self, src, dst):
        return self.table.get((src, dst))

    def update(self, utilization):
        """Feed one period of per-link utilizations; return changed pairs."""
        self.tick += 1
        moved = False
        for key, st in self.state.items():
            u = min(1.0, max(0.0, float(utilization.get(key, 0.0))))
            raw = map_utilization_to_weight(u, self.wmap)
            st.utilization = u
            st.history.appendleft(raw)
            smoothed = smooth_weight(st.history)
            if should_update(smoothed, st.active, self.threshold):
                st.active = smoothed
                moved = True
            self.history.append((self.tick, key, u, raw, smoothed, st.active))
        if not moved:
            return []
        update = recompute_default_paths(self.topo, self.weights(), self.table, self.pairs)
        self.table = update.table
        self.unreachable = update.unreachable
        if update.changed:
            self.route_changes += 1
        return update.changed

    def history_csv(self):
        """Weight history as CSV: ``tick,link,utilization,raw,smoothed,active``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "link", "utilization", "raw", "smoothed", "active"])
        for tick, (u, v), util, raw, smoothed, active in self.history:
            w.writerow([tick, f"{u}->{v}", repr(util), repr(raw), repr(smoothed), repr(active)])
        return buf.getvalue()
