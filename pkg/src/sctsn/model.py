"""Core network types: topology ingestion, switch roles and candidate paths.

Topology file grammar (UTF-8, ``#`` starts a comment, blank lines ignored)::

    [defaults]                  # optional; applies to every link below
    capacity = 100e6            # bits/s
    base_delay = 1.0            # abstract latency units
    queue_factor = 0.5          # abstract latency units

    [switches]                  # whitespace separated ids, any number per line
    A B C

    [links]                     # undirected switch-switch edges
    A B
    B C capacity=1e9 base_delay=2.0

    [hosts]                     # either a count for every edge switch ...
    per_edge_switch = 10
    h1 A                        # ... and/or explicit "host switch" lines

Every undirected edge expands into two directed links with identical
parameters. Hosts given by count are named ``<switch>-h<i>``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path as FsPath
from typing import Iterable, Mapping

import networkx as nx

DEFAULT_CAPACITY = 100e6
DEFAULT_BASE_DELAY = 1.0
DEFAULT_QUEUE_FACTOR = 0.5
DEFAULT_K_PATHS = 8

# a path is the ordered sequence of switch ids it visits
Path = tuple


class TopologyError(ValueError):
    """Malformed or inconsistent topology description."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Role(str, Enum):
    EDGE = "edge"
    BACKBONE = "backbone"


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    capacity: float = DEFAULT_CAPACITY
    base_delay: float = DEFAULT_BASE_DELAY
    queue_factor: float = DEFAULT_QUEUE_FACTOR

    @property
    def key(self):
        return (self.src, self.dst)

    @property
    def id(self):
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class Demand:
    """Routing-relevant profile of one stream.

    ``load`` is in bits/s, ``latency_bound`` in the same abstract units as
    the link delays, ``period`` in seconds (None for best-effort).
    """

    id: str
    cls: int
    load: float
    latency_bound: float
    period: float | None = None
    frame_size: int = 1522
    talker: str | None = None
    listener: str | None = None

    def __post_init__(self):
        if not 0 <= self.cls <= 7:
            raise ValueError(f"demand {self.id}: class {self.cls} outside 0..7")
        if not self.load > 0:
            raise ValueError(f"demand {self.id}: load must be > 0")
        if not self.latency_bound > 0:
            raise ValueError(f"demand {self.id}: latency bound must be > 0")
        if self.period is not None:
            expected = self.frame_size * 8 / self.period
            if abs(expected - self.load) > 1e-9 * expected:
                raise ValueError(f"demand {self.id}: load {self.load} != frame size * 8 / period")

    @classmethod
    def periodic(cls, id, period, frame_size=1522, cls_=7, latency_bound=1.0, **kw):
        return cls(id, cls_, frame_size * 8 / period, latency_bound, period, frame_size, **kw)


@dataclass(frozen=True)
class Topology:
    """Directed switch fabric plus host attachments.

    Treat instances as immutable; use :func:`dataclasses.replace` to derive
    variants. ``roles`` is empty until :func:`classify_switch_roles` runs.
    """

    nodes: frozenset
    links: Mapping[tuple, Link]
    hosts: Mapping[str, str] = field(default_factory=dict)
    roles: Mapping[str, Role] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        for (u, v), link in self.links.items():
            for end in (u, v):
                if end not in self.nodes:
                    raise TopologyError(f"link {u}-{v} references undeclared node {end!r}")
            if u == v:
                raise TopologyError(f"self-loop on {u!r}")
            if not link.capacity > 0:
                raise TopologyError(f"link {u}-{v}: capacity must be > 0")
            if link.base_delay < 0 or link.queue_factor < 0:
                raise TopologyError(f"link {u}-{v}: delays must be >= 0")
        for host, sw in self.hosts.items():
            if sw not in self.nodes:
                raise TopologyError(f"host {host!r} attaches to undeclared switch {sw!r}")
            if host in self.nodes:
                raise TopologyError(f"host id {host!r} collides with a switch id")
            if self.roles and self.roles.get(sw) is not Role.EDGE:
                raise TopologyError(f"host {host!r} attaches to non-edge switch {sw!r}")

    @property
    def switches(self):
        return sorted(self.nodes)

    def neighbors(self, node):
        return sorted(v for (u, v) in self.links if u == node)

    def degree(self, node):
        """Inter-switch degree (undirected neighbours, hosts excluded)."""
        return len({v for (u, v) in self.links if u == node} | {u for (u, v) in self.links if v == node})

    def edge_switches(self):
        return sorted(s for s, r in self.roles.items() if r is Role.EDGE)

    def hosts_of(self, switch):
        return sorted(h for h, s in self.hosts.items() if s == switch)

    def graph(self):
        g = nx.DiGraph()
        g.add_nodes_from(sorted(self.nodes))
        for key in sorted(self.links):
            g.add_edge(*key)
        return g

    def path_links(self, path):
        return [self.links[(path[i], path[i + 1])] for i in range(len(path) - 1)]


def _edge_split(nodes, degree):
    avg = sum(degree[n] for n in nodes) / len(nodes) if nodes else 0.0
    return {n: (Role.EDGE if degree[n] < avg else Role.BACKBONE) for n in nodes}


def classify_switch_roles(topo):
    """Mark a switch as edge iff its inter-switch degree is below the average."""
    degree = {n: topo.degree(n) for n in topo.nodes}
    roles = _edge_split(topo.nodes, degree)
    return replace(topo, roles=roles)


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_ID = re.compile(r"^[A-Za-z0-9_.:\-]+$")
_LINK_KEYS = {"capacity", "base_delay", "queue_factor"}


def _parse_number(text, line, what):
    if not re.fullmatch(_NUMBER, text):
        raise TopologyError(f"{what}: expected a number, got {text!r}", line)
    return float(text)


def parse_topology(text, name=""):
    """Parse the topology grammar described in the module docstring."""
    section = None
    defaults = {"capacity": DEFAULT_CAPACITY, "base_delay": DEFAULT_BASE_DELAY,
                "queue_factor": DEFAULT_QUEUE_FACTOR}
    nodes = []
    node_lines = {}
    edges = []
    explicit_hosts = []
    per_edge = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            section = m.group(1).lower()
            if section not in {"defaults", "switches", "links", "hosts"}:
                raise TopologyError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise TopologyError("content before any [section] header", lineno)

        if section == "defaults":
            key, sep, value = (p.strip() for p in line.partition("="))
            if not sep or key not in _LINK_KEYS:
                raise TopologyError(f"bad default {line!r}", lineno)
            defaults[key] = _parse_number(value, lineno, key)
        elif section == "switches":
            for tok in line.split():
                if not _ID.match(tok):
                    raise TopologyError(f"invalid switch id {tok!r}", lineno)
                if tok in node_lines:
                    raise TopologyError(f"duplicate switch {tok!r}", lineno)
                node_lines[tok] = lineno
                nodes.append(tok)
        elif section == "links":
            toks = line.split()
            if len(toks) < 2:
                raise TopologyError("link needs two endpoints", lineno)
            u, v, *opts = toks
            params = {}
            for opt in opts:
                key, sep, value = opt.partition("=")
                if not sep or key not in _LINK_KEYS:
                    raise TopologyError(f"bad link option {opt!r}", lineno)
                params[key] = _parse_number(value, lineno, key)
            edges.append((lineno, u, v, params))
        elif section == "hosts":
            if "=" in line:
                key, _, value = (p.strip() for p in line.partition("="))
                if key != "per_edge_switch" or not value.isdigit():
                    raise TopologyError(f"bad hosts setting {line!r}", lineno)
                per_edge = int(value)
            else:
                toks = line.split()
                if len(toks) != 2:
                    raise TopologyError("host line must be 'host switch'", lineno)
                explicit_hosts.append((lineno, toks[0], toks[1]))

    node_set = frozenset(nodes)
    links = {}
    for lineno, u, v, params in edges:
        for end in (u, v):
            if end not in node_set:
                raise TopologyError(f"link references undeclared node {end!r}", lineno)
        if u == v:
            raise TopologyError(f"self-loop on {u!r}", lineno)
        if (u, v) in links:
            raise TopologyError(f"duplicate link {u}-{v}", lineno)
        p = {**defaults, **params}
        if not p["capacity"] > 0:
            raise TopologyError(f"link {u}-{v}: capacity must be > 0", lineno)
        if p["base_delay"] < 0 or p["queue_factor"] < 0:
            raise TopologyError(f"link {u}-{v}: delays must be >= 0", lineno)
        for a, b in ((u, v), (v, u)):
            links[(a, b)] = Link(a, b, p["capacity"], p["base_delay"], p["queue_factor"])

    hosts = {}
    for lineno, h, s in explicit_hosts:
        if s not in node_set:
            raise TopologyError(f"host {h!r} attaches to undeclared switch {s!r}", lineno)
        if h in hosts or h in node_set:
            raise TopologyError(f"duplicate host id {h!r}", lineno)
        hosts[h] = s

    topo = Topology(nodes=node_set, links=links, hosts=hosts, name=name)
    if per_edge:
        degree = {n: topo.degree(n) for n in node_set}
        roles = _edge_split(node_set, degree)
        for sw in sorted(n for n, r in roles.items() if r is Role.EDGE):
            for i in range(per_edge):
                h = f"{sw}-h{i}"
                if h in hosts:
                    raise TopologyError(f"generated host id {h!r} collides with an explicit host")
                hosts[h] = sw
        topo = replace(topo, hosts=hosts)
    return topo


def load_topology(source):
    """Load a topology from a path, a bundled name (``"integra"``) or raw text."""
    if isinstance(source, FsPath) or (isinstance(source, str) and "\n" not in source):
        path = FsPath(source)
        if not path.exists():
            bundled = FsPath(__file__).parent / "data" / "topologies" / f"{source}.topo"
            if bundled.exists():
                path = bundled
            else:
                raise TopologyError(f"topology file not found: {source}")
        return parse_topology(path.read_text(encoding="utf-8"), name=path.stem)
    return parse_topology(source)


def bundled_topologies():
    root = FsPath(__file__).parent / "data" / "topologies"
    return sorted(p.stem for p in root.glob("*.topo"))


def _simple_paths_by_length(graph, src, dst):
    # networkx yields simple paths in nondecreasing hop count
    return nx.shortest_simple_paths(graph, src, dst)


def k_shortest_paths(topo, src, dst, k=DEFAULT_K_PATHS):
    """Up to ``k`` loop-free paths ordered by (hop count, node-id sequence).

    Ties at the hop count of the k-th path are all collected before sorting,
    so the result is a prefix of the same total order for every ``k``.
    """
    if src == dst:
        raise ValueError("source and destination switch must differ")
    if k < 1:
        raise ValueError("k must be >= 1")
    graph = topo.graph()
    if src not in graph or dst not in graph:
        raise ValueError(f"unknown switch {src!r} or {dst!r}")
    found = []
    try:
        for p in _simple_paths_by_length(graph, src, dst):
            if len(found) >= k and len(p) > len(found[k - 1]):
                break
            found.append(tuple(p))
    except nx.NetworkXNoPath:
        return []
    found.sort(key=lambda p: (len(p), p))
    return found[:k]


def all_simple_paths(topo, src, dst):
    """Exhaustive DFS enumeration; intended for small graphs and tests."""
    out = []
    adj = {n: topo.neighbors(n) for n in topo.nodes}

    def walk(node, seen, acc):
        if node == dst:
            out.append(tuple(acc))
            return
        for nxt in adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                acc.append(nxt)
                walk(nxt, seen, acc)
                acc.pop()
                seen.discard(nxt)

    walk(src, {src}, [src])
    return sorted(out, key=lambda p: (len(p), p))


def is_simple_path(topo, path):
    if len(set(path)) != len(path):
        return False
    return all((path[i], path[i + 1]) in topo.links for i in range(len(path) - 1))


def make_topology(edges: Iterable, nodes=None, hosts=None, classify=True, **link_params):
    """Build a topology programmatically from undirected ``(u, v)`` pairs."""
    links = {}
    node_set = set(nodes or ())
    for u, v in edges:
        node_set.update((u, v))
        for a, b in ((u, v), (v, u)):
            links[(a, b)] = Link(a, b, **link_params)
    topo = Topology(nodes=frozenset(node_set), links=links)
    if classify:
        topo = classify_switch_roles(topo)
    if hosts:
        topo = replace(topo, hosts=dict(hosts))
    return topo


def relabel(topo, mapping):
    """Rename switches; used to check that roles depend on degree only."""
    links = {}
    for (u, v), link in topo.links.items():
        a, b = mapping[u], mapping[v]
        links[(a, b)] = replace(link, src=a, dst=b)
    return Topology(
        nodes=frozenset(mapping[n] for n in topo.nodes),
        links=links,
        hosts={h: mapping[s] for h, s in topo.hosts.items()},
        roles={mapping[s]: r for s, r in topo.roles.items()},
        name=topo.name,
    )


def pairs(items):
    return [(a, b) for a, b in itertools.permutations(items, 2)]
