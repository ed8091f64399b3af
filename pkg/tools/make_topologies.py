#!/usr/bin/env python3
"""Regenerate the bundled stand-in topologies.

The original Topology Zoo graphs are not shipped. Each stand-in is a
connected random graph drawn for a fixed degree sequence, searched over
seeds until it reproduces the published switch-graph statistics: switch
count, inter-switch edge count, and the edge/backbone split under the
below-average-degree rule. Output is deterministic.

    python tools/make_topologies.py src/sctsn/data/topologies
"""

import sys
from pathlib import Path

import networkx as nx

# name: (degree sequence, hosts per edge switch, expected edge switches)
SPECS = {
    "getnet": ([4, 3, 3, 2, 2, 1, 1], 10, 4),
    "integra": ([6, 5, 5, 4, 4, 4, 4, 3, 3, 3, 3] + [2] * 12 + [1] * 4, 5, 16),
    "garr201001": ([12, 9, 7, 6, 5, 5, 5, 4, 4, 4, 4, 3, 3, 3, 3, 3] + [2] * 18 + [1] * 20, 2, 38),
}


def build(seq, expected_edge):
    n = len(seq)
    avg = sum(seq) / n
    for seed in range(100000):
        try:
            g = nx.random_degree_sequence_graph(seq, seed=seed, tries=20)
        except nx.NetworkXUnfeasible:
            continue
        if not nx.is_connected(g):
            continue
        edge = sum(1 for v in g if g.degree(v) < avg)
        if edge == expected_edge and g.number_of_edges() == sum(seq) // 2:
            return seed, g
    raise RuntimeError("no matching graph found")


def render(name, g, per_edge, seed):
    width = len(str(g.number_of_nodes() - 1))
    label = {v: f"s{v:0{width}d}" for v in g}
    lines = [
        f"# {name}: synthetic stand-in (degree-sequence graph, seed {seed})",
        f"# {g.number_of_nodes()} switches, {g.number_of_edges()} inter-switch edges",
        "",
        "[defaults]",
        "capacity = 100e6",
        "base_delay = 1.0",
        "queue_factor = 0.5",
        "",
        "[switches]",
    ]
    names = [label[v] for v in sorted(g)]
    for i in range(0, len(names), 10):
        lines.append(" ".join(names[i:i + 10]))
    lines += ["", "[links]"]
    for u, v in sorted((min(a, b), max(a, b)) for a, b in g.edges()):
        lines.append(f"{label[u]} {label[v]}")
    lines += ["", "[hosts]", f"per_edge_switch = {per_edge}", ""]
    return "\n".join(lines)


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (seq, per_edge, n_edge) in SPECS.items():
        seed, g = build(seq, n_edge)
        (out / f"{name}.topo").write_text(render(name, g, per_edge, seed), encoding="utf-8")
        print(name, "seed", seed)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/sctsn/data/topologies")
