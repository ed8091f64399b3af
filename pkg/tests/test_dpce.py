import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from sctsn.dpce import (DefaultPathEngine, WeightMap, map_utilization_to_weight,
                        recompute_default_paths, should_update, smooth_weight)
from sctsn.model import make_topology

# diamond: two equal-hop routes from a to d
DIAMOND = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]


@pytest.mark.parametrize("u, w", [(0.0, 1.0), (0.3, 1.0), (0.65, 5.5), (1.0, 10.0)])
def test_weight_map_values(u, w):
    assert map_utilization_to_weight(u) == pytest.approx(w)


def test_weight_map_domain():
    with pytest.raises(ValueError):
        map_utilization_to_weight(1.01)
    with pytest.raises(ValueError):
        WeightMap(u_low=1.0)


@settings(max_examples=100)
@given(st.floats(0, 1), st.floats(0, 1))
def test_weight_map_monotone_and_bounded(u1, u2):
    lo, hi = sorted((u1, u2))
    assert 1.0 <= map_utilization_to_weight(lo) <= map_utilization_to_weight(hi) <= 10.0


def test_smoothing_and_renormalization():
    assert smooth_weight([10, 1, 1]) == pytest.approx(5.5)
    assert smooth_weight([4, 2]) == pytest.approx(3.25)
    assert smooth_weight([7]) == 7
    assert smooth_weight([1, 2, 3, 99]) == pytest.approx(1.7)
    with pytest.raises(ValueError):
        smooth_weight([])


def test_update_threshold_is_strict():
    assert not should_update(1.2, 1.0)
    assert should_update(1.2001, 1.0)
    assert should_update(0.79, 1.0)


def test_ties_resolve_to_smallest_node_sequence():
    topo = make_topology(DIAMOND)
    upd = recompute_default_paths(topo, {k: 1.0 for k in topo.links}, pairs=[("a", "d")])
    assert upd.table[("a", "d")] == ("a", "b", "d")


def brute_force_route(topo, weights, s, d):
    best = None
    for p in nx.all_simple_paths(topo.graph(), s, d):
        cost = sum(weights[(p[i], p[i + 1])] for i in range(len(p) - 1))
        key = (round(cost, 9), tuple(p))
        if best is None or key < best:
            best = key
    return best[1]


@st.composite
def weighted_graphs(draw):
    n = draw(st.integers(3, 6))
    nodes = [f"n{i}" for i in range(n)]
    pairs = list(itertools.combinations(nodes, 2))
    edges = draw(st.lists(st.sampled_from(pairs), min_size=n - 1, max_size=len(pairs), unique=True))
    topo = make_topology(edges, nodes=nodes, classify=False)
    weights = {k: float(draw(st.integers(1, 4))) for k in sorted(topo.links)}
    return topo, weights


@settings(max_examples=80, deadline=None)
@given(weighted_graphs())
def test_routes_match_exhaustive_lexicographic_minimum(tw):
    topo, weights = tw
    upd = recompute_default_paths(topo, weights, pairs=list(itertools.permutations(sorted(topo.nodes), 2)))
    for (s, d), path in upd.table.items():
        assert path == brute_force_route(topo, weights, s, d)
    for s, d in upd.unreachable:
        assert not nx.has_path(topo.graph(), s, d)


def engine_at(u0):
    topo = make_topology(DIAMOND)
    w0 = map_utilization_to_weight(u0)
    return DefaultPathEngine(topo, initial_weights={k: w0 for k in topo.links},
                             pairs=[("a", "d")])


def inverse_weight(w, wmap=WeightMap()):
    return wmap.u_low + (1 - wmap.u_low) * (w - wmap.w_min) / (wmap.w_max - wmap.w_min)


def test_oscillation_does_not_move_routes():
    eng = engine_at(0.65)
    w0 = map_utilization_to_weight(0.65)
    hi, lo = inverse_weight(w0 * 1.15), inverse_weight(w0 * 0.85)
    for tick in range(50):
        u = {k: 0.65 for k in eng.topo.links}
        u[("a", "b")] = hi if tick % 2 == 0 else lo
        assert eng.update(u) == []
    assert eng.route_changes == 0
    assert eng.path("a", "d") == ("a", "b", "d")


def test_sustained_step_moves_route_once():
    eng = engine_at(0.65)
    changes = []
    for _ in range(50):
        u = {k: 0.65 for k in eng.topo.links}
        u[("a", "b")] = 0.65 * 1.5
        changes.append(eng.update(u))
    assert sum(1 for c in changes if c) == 1
    assert eng.route_changes == 1
    assert eng.path("a", "d") == ("a", "c", "d")


def test_history_rows():
    eng = engine_at(0.3)
    eng.update({k: 0.5 for k in eng.topo.links})
    lines = eng.history_csv().splitlines()
    assert lines[0] == "tick,link,utilization,raw,smoothed,active"
    assert len(lines) == 1 + len(eng.topo.links)
