"""Discrete-event world: hosts, strict-priority switches and the controller.

Every frame is tagged and given its path at the ingress switch. Paths are
carried in the frame, which models versioned rule updates: a frame that
entered on the old path finishes on it. Rule installs cost
``install_delay`` per switch whose entry for the stream changes; the
ingress entry is always written last, so the new path is only used once
the whole path is in place.

Events are ``(time, sequence, handler, argument)`` tuples on a heap; the
sequence number breaks ties in scheduling order.
"""

from __future__ import annotations

import heapq
import zlib
from array import array

import numpy as np

from ..dpce import DefaultPathEngine
from ..learner import StreamLearner, Verdict
from ..model import Demand, k_shortest_paths
from ..tsor import Infeasible, TT_CLASS, build_instance, solve, switch_path
from .port import Frame, Port

TT, BE = "TT", "BE"


class SimulationError(RuntimeError):
    pass


class Stream:
    __slots__ = ("id", "kind", "talker", "listener", "ingress", "egress", "period", "offset",
                 "frame_size", "rng", "gaps", "seq", "path", "tag", "rules", "version",
                 "miss_pending", "buffer", "placed", "unplaced", "learner",
                 "generated", "delivered", "dropped", "delayed", "tagged", "correct",
                 "first_tt_at", "migrations")

    def __init__(self, sid, kind, talker, listener, ingress, egress, frame_size):
        self.id = sid
        self.kind = kind
        self.talker = talker
        self.listener = listener
        self.ingress = ingress
        self.egress = egress
        self.frame_size = frame_size
        self.period = None
        self.offset = 0.0
        self.rng = None
        self.gaps = None
        self.seq = 0
        self.path = None
        self.tag = 0
        self.rules = {}
        self.version = 0
        self.miss_pending = False
        self.buffer = []
        self.placed = False
        self.unplaced = False
        self.learner = None
        self.generated = self.delivered = self.dropped = self.delayed = 0
        self.tagged = self.correct = 0
        self.first_tt_at = None
        self.migrations = 0


class World:
    def __init__(self, scenario, trace=None):
        self.sc = scenario
        self.topo = scenario.load_topology()
        self.trace = trace
        net = scenario.network
        self.proc = net.processing_delay
        self.install_delay = net.install_delay
        self.events = []
        self.seq = 0
        self.now = 0.0
        self.n_events = 0

        self.ports = {}
        for key, ln in sorted(self.topo.links.items()):
            self.ports[key] = self._port(key, ln.capacity, key[1], False)
        self.up, self.down = {}, {}
        for h, sw in sorted(self.topo.hosts.items()):
            rate = self._host_rate(sw)
            self.up[h] = self._port(("host", h), rate, sw, False)
            self.down[(sw, h)] = self._port((sw, h), rate, h, True)

        self.engine = DefaultPathEngine(self.topo)
        self._kpaths = {}
        self._bound = {}
        self.placed = {}   # stream id -> (Demand, switch path)

        self.counters = {"packet_in": 0, "placements": 0, "unplaced": 0, "migrations": 0,
                         "rule_installs": 0, "dpce_reroutes": 0, "deviations": 0,
                         "solves": 0}
        self.lat = {TT: array("d"), BE: array("d")}
        self.util_series = []
        self._last_bytes = {key: 0 for key in self.topo.links}
        self.streams = self._make_streams()

    # -- construction -------------------------------------------------------
    def _host_rate(self, sw):
        if self.sc.network.host_rate is not None:
            return self.sc.network.host_rate
        caps = [ln.capacity for (u, _), ln in self.topo.links.items() if u == sw]
        return min(caps) if caps else 100e6

    def _port(self, key, rate, peer, to_host):
        p = Port(key, rate, self.sc.network.propagation_delay, self.sc.network.queue_bound)
        p.peer = peer
        p.to_host = to_host
        return p

    def _make_streams(self):
        sc = self.sc
        n_tt, n_be = sc.stream_counts(self.topo)
        hosts = sorted(self.topo.hosts)
        if len({self.topo.hosts[h] for h in hosts}) < 2 and n_tt + n_be:
            raise SimulationError("streams need hosts on at least two switches")
        children = np.random.SeedSequence(sc.seed).spawn(2 + n_be)
        rng = np.random.Generator(np.random.PCG64(children[0]))
        order = list(rng.permutation(len(hosts)))
        streams = []
        for i in range(n_tt + n_be):
            kind = TT if i < n_tt else BE
            talker = hosts[order[i % len(hosts)]]
            sw = self.topo.hosts[talker]
            others = [h for h in hosts if self.topo.hosts[h] != sw]
            listener = others[int(rng.integers(len(others)))]
            sid = f"tt{i}" if kind == TT else f"be{i - n_tt}"
            size = sc.tt.frame_size if kind == TT else sc.be.frame_size
            streams.append(Stream(sid, kind, talker, listener, sw, self.topo.hosts[listener], size))
        prng = np.random.Generator(np.random.PCG64(children[1]))
        for s in streams[:n_tt]:
            s.period = float(prng.uniform(sc.tt.period_min, sc.tt.period_max))
            s.offset = float(prng.uniform(0.0, s.period))
        for j, s in enumerate(streams[n_tt:]):
            s.rng = np.random.Generator(np.random.PCG64(children[2 + j]))
            s.gaps = iter(())
        if sc.mode == "sctsn":
            for s in streams:
                s.learner = StreamLearner(s.id)
        return streams

    # -- event plumbing -----------------------------------------------------
    def schedule(self, t, fn, arg=None):
        self.seq += 1
        heapq.heappush(self.events, (t, self.seq, fn, arg))

    def run(self):
        horizon = self.sc.duration
        if self.sc.mode == "srp":
            self._srp_setup()
        for s in self.streams:
            first = s.offset if s.kind == TT else self._be_gap(s)
            if first <= horizon:
                self.schedule(first, self._generate, s)
        self.schedule(self.sc.stats_period, self._stats_tick)
        limit = self.sc.max_events
        events = self.events
        pop = heapq.heappop
        while events and events[0][0] <= horizon:
            t, _, fn, arg = pop(events)
            self.now = t
            fn(arg)
            self.n_events += 1
            if self.n_events > limit:
                raise SimulationError(f"event limit {limit} exceeded at t={t}")
        self.now = horizon
        return self

    # -- traffic sources ----------------------------------------------------
    def _be_gap(self, s):
        try:
            return next(s.gaps)
        except StopIteration:
            s.gaps = iter(s.rng.exponential(self.sc.be.mean_interarrival, 1024).tolist())
            return next(s.gaps)

    def _generate(self, s):
        now = self.now
        f = Frame(s, s.seq, now, s.frame_size)
        s.seq += 1
        s.generated += 1
        self._offer(self.up[s.talker], f, now)
        if s.kind == TT:
            nxt = s.offset + s.seq * s.period
        else:
            nxt = now + self._be_gap(s)
        if nxt <= self.sc.duration:
            self.schedule(nxt, self._generate, s)

    # -- data plane ---------------------------------------------------------
    def _offer(self, port, frame, now):
        r = port.offer(frame, now)
        if r is frame:
            self._transmit(port, frame, now)
        elif r is None:
            if not port.free_pending:
                port.free_pending = True
                self.schedule(port.busy_until, self._port_free, port)
        else:
            frame.stream.dropped += 1
            if frame.stream.kind == TT:
                frame.stream.delayed += 1

    def _transmit(self, port, frame, now):
        t_arr = port.start(frame, now)
        if port.to_host:
            self.schedule(t_arr, self._deliver, frame)
        else:
            self.schedule(t_arr + self.proc, self._at_switch, frame)

    def _port_free(self, port):
        frame = port.release()
        if frame is None:
            port.free_pending = False
            return
        self._transmit(port, frame, self.now)
        if port.n_queued:
            self.schedule(port.busy_until, self._port_free, port)
        else:
            port.free_pending = False

    def _at_switch(self, frame):
        if frame.path is None:
            self._ingress(frame)
        else:
            self._forward(frame, self.now)

    def _forward(self, frame, now):
        i = frame.hop
        path = frame.path
        if i + 1 < len(path):
            frame.hop = i + 1
            self._offer(self.ports[(path[i], path[i + 1])], frame, now)
        else:
            self._offer(self.down[(path[i], frame.stream.listener)], frame, now)

    def _deliver(self, frame):
        s = frame.stream
        latency = self.now - frame.created
        s.delivered += 1
        self.lat[s.kind].append(latency)
        if s.kind == TT and latency > s.period:
            s.delayed += 1
        if self.trace is not None:
            ph = zlib.crc32("/".join(frame.path).encode())
            self.trace.write(f"{s.id},{frame.tag},{frame.created!r},{self.now!r},{ph:08x}\n")

    def _ingress(self, frame):
        s = frame.stream
        now = self.now
        t_arr = now - self.proc
        frame.t_ingress = t_arr
        frame.tag = s.tag
        s.tagged += 1
        if (s.tag == TT_CLASS) == (s.kind == TT):
            s.correct += 1
        if s.learner is not None:
            res = s.learner.observe(t_arr)
            if res is Verdict.TT and not s.placed:
                self._place(s, now)
            elif res == "deviation":
                self.counters["deviations"] += 1
                if s.placed:
                    self._unplace(s, now)
        if s.path is None:
            s.buffer.append(frame)
            if not s.miss_pending:
                s.miss_pending = True
                self.counters["packet_in"] += 1
                self._request_path(s, self.engine.path(s.ingress, s.egress), s.tag, now)
            return
        frame.path = s.path
        frame.hop = 0
        self._forward(frame, now)

    # -- control plane ------------------------------------------------------
    def _next_hops(self, s, path):
        hops = {path[i]: path[i + 1] for i in range(len(path) - 1)}
        hops[path[-1]] = s.listener
        return hops

    def _request_path(self, s, path, tag, now, delay=0.0):
        """Install ``path`` for ``s``; the switch-over happens when all rules are in."""
        if path is None:
            raise SimulationError(f"no default path {s.ingress}->{s.egress}")
        hops = self._next_hops(s, path)
        changed = [sw for sw, nh in hops.items() if s.rules.get(sw) != nh]
        s.version += 1
        done = now + delay + self.install_delay * len(changed)
        self.schedule(done, self._install_done, (s, s.version, tuple(path), tag, hops, len(changed)))

    def _install_done(self, arg):
        s, version, path, tag, hops, n_changed = arg
        if version != s.version:
            return  # superseded by a later request
        self.counters["rule_installs"] += n_changed
        s.rules.update(hops)
        if s.path is not None and s.path != path:
            s.migrations += 1
            self.counters["migrations"] += 1
        s.path = path
        s.tag = tag
        if tag == TT_CLASS and s.first_tt_at is None:
            s.first_tt_at = self.now
        s.miss_pending = False
        if s.buffer:
            buf, s.buffer = s.buffer, []
            for f in buf:
                f.path = path
                f.hop = 0
                self._forward(f, self.now)

    def _candidates(self, a, b, k):
        key = (a, b, k)
        if key not in self._kpaths:
            self._kpaths[key] = k_shortest_paths(self.topo, a, b, k)
        return self._kpaths[key]

    def _latency_bound(self, a, b):
        key = (a, b)
        if key not in self._bound:
            p = self._candidates(a, b, 1)[0]
            self._bound[key] = 2.0 * sum(self.topo.links[(p[i], p[i + 1])].base_delay +
                                         self.topo.links[(p[i], p[i + 1])].queue_factor
                                         for i in range(len(p) - 1))
        return self._bound[key]

    def _demand(self, s, period):
        return Demand.periodic(s.id, period, s.frame_size, TT_CLASS,
                               self._latency_bound(s.ingress, s.egress),
                               talker=s.talker, listener=s.listener)

    def _solve(self, demands, existing, fixed_only):
        self.counters["solves"] += 1
        inst = build_instance(self.topo, demands, existing, self.sc.controller.k_paths,
                              fixed_only=fixed_only, paths_fn=self._candidates)
        sol = solve(inst)
        return {d.id: switch_path(inst, d.id, sol.assignment[d.id]) for d in demands}

    def _place(self, s, now):
        est = s.learner.estimate
        period = est.grid_period or est.period
        new = self._demand(s, period)
        full = self.sc.controller.full_reopt
        demands = [d for d, _ in self.placed.values()] + [new]
        existing = {} if full else {sid: p for sid, (_, p) in self.placed.items()}
        try:
            paths = self._solve(demands, existing, fixed_only=not full)
        except Infeasible:
            self.counters["unplaced"] += 1
            s.unplaced = True
            return
        s.placed = True
        s.unplaced = False
        self.counters["placements"] += 1
        self.placed[s.id] = (new, paths[s.id])
        delay = self.sc.controller.solve_delay
        self._request_path(s, paths[s.id], TT_CLASS, now, delay)
        if full:
            by_id = {x.id: x for x in self.streams}
            for sid, p in paths.items():
                if sid != s.id and p != self.placed[sid][1]:
                    self.placed[sid] = (self.placed[sid][0], p)
                    self._request_path(by_id[sid], p, TT_CLASS, now, delay)

    def _unplace(self, s, now):
        del self.placed[s.id]
        s.placed = False
        self._request_path(s, self.engine.path(s.ingress, s.egress), 0, now)

    def _srp_setup(self):
        tts = [s for s in self.streams if s.kind == TT]
        if not tts:
            return
        demands = [self._demand(s, s.period) for s in tts]
        try:
            paths = self._solve(demands, {}, fixed_only=False)
        except Infeasible:
            paths = None
            self.counters["unplaced"] += len(tts)
        for s, d in zip(tts, demands):
            path = paths[s.id] if paths else self.engine.path(s.ingress, s.egress)
            s.path = tuple(path)
            s.rules.update(self._next_hops(s, s.path))
            s.tag = TT_CLASS
            s.first_tt_at = 0.0
            if paths:
                s.placed = True
                self.placed[s.id] = (d, s.path)
                self.counters["placements"] += 1
            else:
                s.unplaced = True

    def _stats_tick(self, _):
        period = self.sc.stats_period
        util = {}
        for key, port in self.ports.items():
            sent = port.tx_bytes - self._last_bytes[key]
            self._last_bytes[key] = port.tx_bytes
            util[key] = min(1.0, sent * 8.0 / (port.rate * period))
            self.util_series.append((self.now, key, util[key]))
        changed = set(self.engine.update(util))
        if changed:
            for s in self.streams:
                if s.placed or (s.path is None and not s.miss_pending):
                    continue
                if (s.ingress, s.egress) in changed:
                    self.counters["dpce_reroutes"] += 1
                    self._request_path(s, self.engine.path(s.ingress, s.egress), s.tag, self.now)
        nxt = self.now + period
        if nxt <= self.sc.duration:
            self.schedule(nxt, self._stats_tick)

    # -- accounting ---------------------------------------------------------
    def in_flight(self):
        """Frames still inside the network at the horizon, per stream id."""
        count = {s.id: 0 for s in self.streams}
        for _, _, fn, arg in self.events:
            if isinstance(arg, Frame):
                count[arg.stream.id] += 1
        for port in list(self.ports.values()) + list(self.up.values()) + list(self.down.values()):
            for f in port.frames():
                count[f.stream.id] += 1
        for s in self.streams:
            count[s.id] += len(s.buffer)
        return count


def run(scenario, trace=None):
    """Simulate ``scenario`` and return its :class:`MetricsReport`."""
    from .metrics import compute_metrics
    return compute_metrics(World(scenario, trace).run())
