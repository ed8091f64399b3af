"""TSOR problem data, solutions and the plain-text instance format.

Instance file grammar (``#`` comments, whitespace separated fields)::

    version 1
    [links]
    # id   capacity  base_delay  queue_factor
    e1     100e6     1.0         0.5
    [demands]
    # id   class  load(bit/s)  latency_bound
    d1     7      1e6          10
    [paths]
    # demand  path_id  link ids in order
    d1        p0       e1 e2
    [preassign]
    d1        p0

Solutions are written as CSV with the header ``kind,key,subkey,value``:
one ``x`` row per (demand, path), one ``g`` row per (link, class) and a
final ``objective`` row.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

from ..model import DEFAULT_K_PATHS, Demand, k_shortest_paths

CLASSES = tuple(range(8))
BEST_EFFORT = 0
TT_CLASS = 7

FAMILIES = ("assignment", "capacity", "gate_sum", "latency", "gate_congestion", "preassignment")


class InstanceError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Infeasible(Exception):
    """No assignment satisfies the constraints; ``family`` names the culprit."""

    def __init__(self, family, detail=""):
        self.family = family
        self.detail = detail
        super().__init__(f"infeasible: {family} constraints cannot be satisfied" +
                         (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class LinkParams:
    id: str
    capacity: float
    base_delay: float = 1.0
    queue_factor: float = 0.5


@dataclass
class TsorInstance:
    links: dict                       # link id -> LinkParams
    demands: list                     # Demand, in branching order
    paths: dict                       # demand id -> list of tuples of link ids
    preassigned: dict = field(default_factory=dict)  # demand id -> path index
    path_names: dict = field(default_factory=dict)   # demand id -> list of names
    classes: tuple = CLASSES

    def __post_init__(self):
        seen = set()
        for d in self.demands:
            if d.id in seen:
                raise InstanceError(f"duplicate demand {d.id!r}")
            seen.add(d.id)
            cands = self.paths.get(d.id)
            if not cands:
                raise Infeasible("assignment", f"demand {d.id} has no candidate path")
            for p in cands:
                for e in p:
                    if e not in self.links:
                        raise InstanceError(f"path of {d.id} uses unknown link {e!r}")
            if d.cls not in self.classes:
                raise InstanceError(f"demand {d.id} has class {d.cls} outside S")
        for did, idx in self.preassigned.items():
            if did not in seen:
                raise InstanceError(f"preassignment for unknown demand {did!r}")
            if not 0 <= idx < len(self.paths[did]):
                raise InstanceError(f"preassigned path {idx} of {did} is not a candidate")
        for did in seen:
            self.path_names.setdefault(did, [f"p{i}" for i in range(len(self.paths[did]))])

    @property
    def n_assignment_vars(self):
        return sum(len(self.paths[d.id]) for d in self.demands)

    def alpha(self, demand_id, path_index):
        return set(self.paths[demand_id][path_index])


@dataclass
class TsorSolution:
    assignment: dict   # demand id -> chosen path index
    gates: dict        # (link id, class) -> g
    objective: float

    def x(self, instance):
        return {(d.id, p): int(self.assignment[d.id] == p)
                for d in instance.demands for p in range(len(instance.paths[d.id]))}


def path_latency(instance, demand, links, gates):
    return sum(instance.links[e].base_delay +
               instance.links[e].queue_factor * (1.0 - gates[(e, demand.cls)]) for e in links)


def objective_value(instance, assignment, gates):
    """Total latency of the selected paths computed directly from (x, g)."""
    return sum(path_latency(instance, d, instance.paths[d.id][assignment[d.id]], gates)
               for d in instance.demands)


def class_loads(instance, assignment):
    """Utilization share per (link, class) implied by an assignment."""
    loads = {}
    for d in instance.demands:
        for e in instance.paths[d.id][assignment[d.id]]:
            key = (e, d.cls)
            loads[key] = loads.get(key, 0.0) + d.load / instance.links[e].capacity
    return loads


def normalize_idle_gates(instance, assignment, gates):
    """Give idle links the canonical split g[e, best-effort] = 1."""
    used = {e for d in instance.demands for e in instance.paths[d.id][assignment[d.id]]}
    out = dict(gates)
    for e in instance.links:
        if e not in used:
            for s in instance.classes:
                out[(e, s)] = 1.0 if s == BEST_EFFORT else 0.0
    return out


def default_latency_bound(hops, base_delay=1.0, queue_factor=0.5):
    return 2.0 * hops * (base_delay + queue_factor)


def link_id(u, v):
    return f"{u}->{v}"


def build_instance(topo, demands, existing=None, k=DEFAULT_K_PATHS, fixed_only=False,
                   paths_fn=None):
    """Assemble a TSOR instance over the switch fabric.

    ``demands`` carry talker/listener hosts; candidates come from
    :func:`k_shortest_paths` between their edge switches (or from
    ``paths_fn(src, dst, k)``). ``existing`` maps demand ids to an already
    installed switch path; a path outside the top ``k`` is appended as an
    extra candidate. With ``fixed_only`` such demands get that single path
    as their only candidate.
    """
    paths_fn = paths_fn or (lambda a, b, n: k_shortest_paths(topo, a, b, n))
    if not demands:
        raise ValueError("no demands")
    if k < 1:
        raise ValueError("k must be >= 1")
    existing = existing or {}
    links, paths, pre, names = {}, {}, {}, {}
    for d in demands:
        src, dst = topo.hosts[d.talker], topo.hosts[d.listener]
        old = existing.get(d.id)
        if old is not None and fixed_only:
            cands = []
        else:
            cands = list(paths_fn(src, dst, k)) if src != dst else []
        if old is not None:
            old = tuple(old)
            if old not in cands:
                cands.append(old)
            pre[d.id] = cands.index(old)
        if not cands:
            raise Infeasible("assignment", f"demand {d.id}: no path between {src} and {dst}")
        paths[d.id] = [tuple(link_id(p[i], p[i + 1]) for i in range(len(p) - 1)) for p in cands]
        names[d.id] = ["/".join(p) for p in cands]
        for p in cands:
            for i in range(len(p) - 1):
                ln = topo.links[(p[i], p[i + 1])]
                links[link_id(*ln.key)] = LinkParams(link_id(*ln.key), ln.capacity,
                                                     ln.base_delay, ln.queue_factor)
    ordered = {lid: links[lid] for lid in sorted(links)}
    return TsorInstance(ordered, list(demands), paths, pre, names)


def switch_path(instance, demand_id, index):
    """Switch sequence of a candidate (inverse of the link-id encoding)."""
    name = instance.path_names[demand_id][index]
    return tuple(name.split("/"))


_NUM = re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$")


def _num(tok, line, what):
    if not _NUM.match(tok):
        raise InstanceError(f"{what}: expected number, got {tok!r}", line)
    return float(tok)


def parse_instance(text):
    section = None
    version = None
    links, demands, paths, names, pre = {}, [], {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("version"):
            toks = line.split()
            if len(toks) != 2 or toks[1] != "1":
                raise InstanceError(f"unsupported version line {line!r}", lineno)
            version = 1
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            section = m.group(1)
            if section not in {"links", "demands", "paths", "preassign"}:
                raise InstanceError(f"unknown section [{section}]", lineno)
            continue
        toks = line.split()
        if section is None:
            raise InstanceError("content before any section header", lineno)
        if section == "links":
            if len(toks) != 4:
                raise InstanceError("link line needs: id capacity base_delay queue_factor", lineno)
            lid = toks[0]
            if lid in links:
                raise InstanceError(f"duplicate link {lid!r}", lineno)
            cap, lo, lq = (_num(t, lineno, w) for t, w in zip(toks[1:], ("capacity", "base_delay", "queue_factor")))
            if cap <= 0 or lo < 0 or lq < 0:
                raise InstanceError(f"link {lid}: capacity must be > 0 and delays >= 0", lineno)
            links[lid] = LinkParams(lid, cap, lo, lq)
        elif section == "demands":
            if len(toks) != 4:
                raise InstanceError("demand line needs: id class load latency_bound", lineno)
            try:
                demands.append(Demand(toks[0], int(toks[1]), _num(toks[2], lineno, "load"),
                                      _num(toks[3], lineno, "latency_bound")))
            except ValueError as exc:
                raise InstanceError(str(exc), lineno) from None
        elif section == "paths":
            if len(toks) < 3:
                raise InstanceError("path line needs: demand path_id link...", lineno)
            did, pid, *lids = toks
            for e in lids:
                if e not in links:
                    raise InstanceError(f"path {pid} uses unknown link {e!r}", lineno)
            paths.setdefault(did, []).append(tuple(lids))
            names.setdefault(did, []).append(pid)
        else:
            if len(toks) != 2:
                raise InstanceError("preassign line needs: demand path_id", lineno)
            did, pid = toks
            if pid not in names.get(did, []):
                raise InstanceError(f"preassigned path {pid!r} is not a candidate of {did!r}", lineno)
            if did in pre:
                raise InstanceError(f"demand {did!r} preassigned twice", lineno)
            pre[did] = names[did].index(pid)
    if version is None:
        raise InstanceError("missing 'version 1' line")
    known = {d.id for d in demands}
    for did in paths:
        if did not in known:
            raise InstanceError(f"paths given for unknown demand {did!r}")
    return TsorInstance(links, demands, paths, pre, names)


def format_instance(inst):
    out = ["version 1", "[links]"]
    for l in inst.links.values():
        out.append(f"{l.id} {l.capacity!r} {l.base_delay!r} {l.queue_factor!r}")
    out.append("[demands]")
    for d in inst.demands:
        out.append(f"{d.id} {d.cls} {d.load!r} {d.latency_bound!r}")
    out.append("[paths]")
    for d in inst.demands:
        for name, p in zip(inst.path_names[d.id], inst.paths[d.id]):
            out.append(f"{d.id} {name.replace(' ', '_')} {' '.join(p)}")
    if inst.preassigned:
        out.append("[preassign]")
        for did, idx in inst.preassigned.items():
            out.append(f"{did} {inst.path_names[did][idx]}")
    return "\n".join(out) + "\n"


def solution_csv(inst, sol):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "key", "subkey", "value"])
    for d in inst.demands:
        for i, name in enumerate(inst.path_names[d.id]):
            w.writerow(["x", d.id, name, int(sol.assignment[d.id] == i)])
    for e in inst.links:
        for s in inst.classes:
            w.writerow(["g", e, s, repr(float(sol.gates[(e, s)]))])
    w.writerow(["objective", "", "", repr(float(sol.objective))])
    return buf.getvalue()
