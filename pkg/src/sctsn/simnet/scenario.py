"""Scenario description and its YAML file format.

A scenario file is a mapping with ``version: 1``; every other key is
optional and falls back to the defaults below::

    version: 1
    name: integra-half
    topology: integra          # bundled name or path to a .topo file
    mode: sctsn                # or srp
    seed: 1
    duration: 100.0            # seconds of simulated time
    stats_period: 2.0
    tt: {count: 53, period_min: 0.002, period_max: 0.020, frame_size: 1522}
    be: {count: 26, mean_interarrival: 0.1, frame_size: 1522}
    network: {processing_delay: 5.0e-6, install_delay: 1.0e-3,
              queue_bound: 524288, propagation_delay: 5.0e-7, host_rate: null}
    controller: {k_paths: 8, full_reopt: false, solve_delay: 0.0}

``tt.count`` and ``be.count`` may be replaced by ``fraction``, a share of
all nodes (switches plus hosts) rounded down.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..model import Topology, load_topology

MODES = ("sctsn", "srp")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class TTSpec:
    count: int = 0
    fraction: float | None = None
    period_min: float = 0.002
    period_max: float = 0.020
    frame_size: int = 1522


@dataclass(frozen=True)
class BESpec:
    count: int = 0
    fraction: float | None = None
    mean_interarrival: float = 0.1
    frame_size: int = 1522


@dataclass(frozen=True)
class NetworkSpec:
    processing_delay: float = 5e-6
    install_delay: float = 1e-3
    queue_bound: int = 512 * 1024
    propagation_delay: float = 5e-7
    host_rate: float | None = None  # defaults to the link capacity


@dataclass(frozen=True)
class ControllerSpec:
    k_paths: int = 8
    full_reopt: bool = False
    solve_delay: float = 0.0


@dataclass(frozen=True)
class Scenario:
    topology: object = "integra"
    name: str = ""
    mode: str = "sctsn"
    seed: int = 0
    duration: float = 100.0
    stats_period: float = 2.0
    tt: TTSpec = field(default_factory=TTSpec)
    be: BESpec = field(default_factory=BESpec)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    max_events: int = 500_000_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.stats_period > 0:
            raise ScenarioError("stats_period must be positive")
        if not self.duration > self.stats_period:
            raise ScenarioError("duration must exceed the statistics period")
        if self.tt.count < 0 or self.be.count < 0:
            raise ScenarioError("stream counts must be >= 0")
        for frac in (self.tt.fraction, self.be.fraction):
            if frac is not None and not 0 <= frac <= 1:
                raise ScenarioError("fractions must lie in [0, 1]")
        if not 0 < self.tt.period_min <= self.tt.period_max:
            raise ScenarioError("need 0 < period_min <= period_max")
        if not self.be.mean_interarrival > 0:
            raise ScenarioError("be.mean_interarrival must be positive")
        for fs in (self.tt.frame_size, self.be.frame_size):
            if not 64 <= fs <= 9000:
                raise ScenarioError("frame_size must lie in [64, 9000] bytes")
        net = self.network
        if net.processing_delay < 0 or net.install_delay < 0 or net.propagation_delay < 0:
            raise ScenarioError("network delays must be >= 0")
        if net.queue_bound < max(self.tt.frame_size, self.be.frame_size):
            raise ScenarioError("queue_bound must hold at least one frame")
        if net.host_rate is not None and not net.host_rate > 0:
            raise ScenarioError("host_rate must be positive")
        if self.controller.k_paths < 1:
            raise ScenarioError("k_paths must be >= 1")
        if self.controller.solve_delay < 0:
            raise ScenarioError("solve_delay must be >= 0")
        if self.max_events < 1:
            raise ScenarioError("max_events must be positive")

    def load_topology(self):
        if isinstance(self.topology, Topology):
            return self.topology
        return load_topology(self.topology)

    def stream_counts(self, topo):
        total = len(topo.nodes) + len(topo.hosts)
        tt = self.tt.count if self.tt.fraction is None else math.floor(self.tt.fraction * total)
        be = self.be.count if self.be.fraction is None else math.floor(self.be.fraction * total)
        return tt, be

    def with_(self, **changes):
        """Copy with top-level or dotted (``be.mean_interarrival``) overrides."""
        top, nested = {}, {}
        for key, val in changes.items():
            if "." in key:
                sec, sub = key.split(".", 1)
                nested.setdefault(sec, {})[sub] = val
            else:
                top[key] = val
        for sec, subs in nested.items():
            if sec not in _SECTIONS:
                raise ScenarioError(f"unknown section {sec!r}")
            try:
                top[sec] = replace(getattr(self, sec), **subs)
            except TypeError as exc:
                raise ScenarioError(str(exc)) from None
        return replace(self, **top)

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.topology, Topology):
            d["topology"] = self.topology.name
        d = {"version": 1, **d}
        return d


_SECTIONS = {"tt": TTSpec, "be": BESpec, "network": NetworkSpec, "controller": ControllerSpec}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {unknown}")
    return cls(**data)


def scenario_from_dict(data, base_dir=None):
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    data = dict(data)
    version = data.pop("version", None)
    if version != 1:
        raise ScenarioError(f"unsupported or missing version: {version!r}")
    kw = {}
    for sec, cls in _SECTIONS.items():
        if sec in data:
            kw[sec] = _build(cls, data.pop(sec), sec)
    top = {f.name for f in fields(Scenario)} - set(_SECTIONS)
    unknown = sorted(set(data) - top)
    if unknown:
        raise ScenarioError(f"unknown keys {unknown}")
    kw.update(data)
    topo = kw.get("topology")
    if isinstance(topo, str) and base_dir is not None and topo.endswith(".topo"):
        candidate = Path(base_dir) / topo
        if candidate.exists():
            kw["topology"] = str(candidate)
    try:
        return Scenario(**kw)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path):
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    return scenario_from_dict(data, base_dir=path.parent)
