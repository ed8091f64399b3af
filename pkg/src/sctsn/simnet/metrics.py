"""Run metrics and their CSV forms.

``metrics.csv`` has the header ``metric,value``; rows appear in the fixed
order of :data:`METRIC_FIELDS` and floats are written with ``repr`` so
identical runs give identical bytes. ``latency.csv`` (``class,quantile,
latency_s``) holds the latency distribution and ``utilization.csv``
(``time_s,link,utilization``) the per-link series sampled every
statistics period. ``weights.csv`` is the link-weight history of the
default path engine.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

QUANTILES = (0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999, 1.0)

METRIC_FIELDS = (
    "mode", "seed", "n_tt", "n_be",
    "tt_generated", "tt_delivered", "tt_dropped", "tt_in_flight",
    "be_generated", "be_delivered", "be_dropped", "be_in_flight",
    "tt_mean_latency", "tt_max_latency", "tt_min_latency",
    "be_mean_latency", "be_max_latency", "be_min_latency",
    "delayed_tt", "delayed_tt_fraction", "cr", "tnr",
    "tt_classified", "be_false_positive_streams", "unplaced",
    "packet_in", "placements", "migrations", "rule_installs", "dpce_reroutes",
    "route_changes", "deviations", "solves", "events",
)


@dataclass
class LatencyStats:
    count: int
    mean: float
    max: float
    min: float
    quantiles: tuple

    @classmethod
    def of(cls, samples):
        a = np.asarray(samples, dtype=float)
        if a.size == 0:
            nan = float("nan")
            return cls(0, nan, nan, nan, tuple(nan for _ in QUANTILES))
        return cls(int(a.size), float(a.mean()), float(a.max()), float(a.min()),
                   tuple(float(q) for q in np.quantile(a, QUANTILES)))


@dataclass
class MetricsReport:
    values: dict
    tt: LatencyStats
    be: LatencyStats
    per_stream: list = field(default_factory=list)
    utilization: list = field(default_factory=list)
    conservation_ok: bool = True
    weights_csv: str = ""

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def metrics_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k in METRIC_FIELDS:
            v = self.values[k]
            w.writerow([k, repr(v) if isinstance(v, float) else v])
        return buf.getvalue()

    def latency_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "quantile", "latency_s"])
        for name, st in (("TT", self.tt), ("BE", self.be)):
            for q, v in zip(QUANTILES, st.quantiles):
                w.writerow([name, repr(q), repr(v)])
        return buf.getvalue()

    def utilization_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s", "link", "utilization"])
        for t, (u, v), x in self.utilization:
            w.writerow([repr(t), f"{u}->{v}", repr(x)])
        return buf.getvalue()

    def streams_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["stream", "kind", "talker", "listener", "period_s", "generated", "delivered",
                "dropped", "delayed", "tagged", "correct", "placed", "unplaced", "first_tt_s"]
        w.writerow(cols)
        for row in self.per_stream:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()

    def summary(self):
        v = self.values

        def ms(x):
            return f"{x * 1e3:9.4f}" if x == x else "      n/a"

        lines = [
            f"mode {v['mode']}  seed {v['seed']}  TT streams {v['n_tt']}  BE streams {v['n_be']}",
            "",
            "class  frames     mean(ms)  max(ms)    min(ms)",
            f"TT     {self.tt.count:<10d} {ms(self.tt.mean)} {ms(self.tt.max)} {ms(self.tt.min)}",
            f"BE     {self.be.count:<10d} {ms(self.be.mean)} {ms(self.be.max)} {ms(self.be.min)}",
            "",
            f"delayed TT frames {v['delayed_tt']} ({v['delayed_tt_fraction']:.4%})",
            f"CR {v['cr']:.4%}  TNR {v['tnr']:.4%}",
            f"unplaced {v['unplaced']}  migrations {v['migrations']}  "
            f"rule installs {v['rule_installs']}  drops {v['tt_dropped'] + v['be_dropped']}",
        ]
        return "\n".join(lines) + "\n"


def compute_metrics(world):
    """Summarize a finished :class:`~sctsn.simnet.world.World`."""
    streams = world.streams
    flight = world.in_flight()
    tot = {"TT": dict(g=0, d=0, x=0, f=0), "BE": dict(g=0, d=0, x=0, f=0)}
    delayed = tagged = correct = be_tagged = be_correct = 0
    per_stream = []
    conservation = True
    for s in streams:
        t = tot[s.kind]
        t["g"] += s.generated
        t["d"] += s.delivered
        t["x"] += s.dropped
        t["f"] += flight[s.id]
        if s.generated != s.delivered + s.dropped + flight[s.id]:
            conservation = False
        tagged += s.tagged
        correct += s.correct
        if s.kind == "TT":
            delayed += s.delayed
        else:
            be_tagged += s.tagged
            be_correct += s.correct
        per_stream.append({
            "stream": s.id, "kind": s.kind, "talker": s.talker, "listener": s.listener,
            "period_s": float(s.period) if s.period else "", "generated": s.generated,
            "delivered": s.delivered, "dropped": s.dropped, "delayed": s.delayed,
            "tagged": s.tagged, "correct": s.correct, "placed": int(s.placed),
            "unplaced": int(s.unplaced),
            "first_tt_s": float(s.first_tt_at) if s.first_tt_at is not None else "",
        })
    tt = LatencyStats.of(world.lat["TT"])
    be = LatencyStats.of(world.lat["BE"])
    tt_done = tot["TT"]["d"] + tot["TT"]["x"]
    c = world.counters
    values = {
        "mode": world.sc.mode, "seed": world.sc.seed,
        "n_tt": sum(1 for s in streams if s.kind == "TT"),
        "n_be": sum(1 for s in streams if s.kind == "BE"),
        "tt_generated": tot["TT"]["g"], "tt_delivered": tot["TT"]["d"],
        "tt_dropped": tot["TT"]["x"], "tt_in_flight": tot["TT"]["f"],
        "be_generated": tot["BE"]["g"], "be_delivered": tot["BE"]["d"],
        "be_dropped": tot["BE"]["x"], "be_in_flight": tot["BE"]["f"],
        "tt_mean_latency": tt.mean, "tt_max_latency": tt.max, "tt_min_latency": tt.min,
        "be_mean_latency": be.mean, "be_max_latency": be.max, "be_min_latency": be.min,
        "delayed_tt": delayed,
        "delayed_tt_fraction": delayed / tt_done if tt_done else 0.0,
        "cr": correct / tagged if tagged else 1.0,
        "tnr": be_correct / be_tagged if be_tagged else 1.0,
        "tt_classified": sum(1 for s in streams if s.kind == "TT" and s.first_tt_at is not None),
        "be_false_positive_streams": sum(1 for s in streams
                                         if s.kind == "BE" and s.first_tt_at is not None),
        "unplaced": c["unplaced"],
        "packet_in": c["packet_in"], "placements": c["placements"],
        "migrations": c["migrations"], "rule_installs": c["rule_installs"],
        "dpce_reroutes": c["dpce_reroutes"], "route_changes": world.engine.route_changes,
        "deviations": c["deviations"], "solves": c["solves"], "events": world.n_events,
    }
    return MetricsReport(values, tt, be, per_stream, list(world.util_series), conservation,
                         world.engine.history_csv())
