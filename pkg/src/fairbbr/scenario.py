"""Scenario configuration (strict JSON schema) and the single-run driver."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import jsonschema
import numpy as np

from .bbr import BbrController
from .fairness import (AlphaMode, CoupledController, CoupledGroup, RttPrime, WINDOW_RTTS,
                       bottleneck_of, group_shared_bottlenecks)
from .measurement import WINDOW_S, WindowRecorder
from .simcore import (NS_PER_S, ConfigError, EventKind, Flow, Link, RunStats, Simulator,
                      seconds_to_ns)

ALGORITHMS = ("bbr", "coupled", "coupled_ml")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["links", "flows"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "duration_s": {"type": "number", "exclusiveMinimum": 0},
        "algorithm": {"enum": list(ALGORITHMS)},
        "alpha_mode": {"enum": [m.value for m in AlphaMode]},
        "rtt_prime": {"enum": [m.value for m in RttPrime]},
        "window_rtts": {"type": "number", "exclusiveMinimum": 0},
        "links": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "rate_bps", "delay_ms", "buffer_pkts"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "rate_bps": {"type": "number", "exclusiveMinimum": 0},
                    "delay_ms": {"type": "number", "minimum": 0},
                    "buffer_pkts": {"type": "integer", "minimum": 1},
                },
            },
        },
        "flows": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "path"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "path": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                    "connection": {"type": "string"},
                    "start_s": {"type": "number", "minimum": 0},
                    "stop_s": {"type": "number", "exclusiveMinimum": 0},
                    "message_bytes": {"type": "integer", "minimum": 1},
                    "send_rate_msgs": {"type": "number", "exclusiveMinimum": 0},
                    "traffic": {"enum": ["poisson", "constant", "bulk"]},
                },
            },
        },
    },
}


class ConfigValidationError(ConfigError):
    """Config rejected; `field` names the offending location when known."""

    def __init__(self, message: str, field: str = "", line: Optional[int] = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)


@dataclass
class LinkSpec:
    id: str
    rate_bps: float
    delay_ms: float
    buffer_pkts: int


@dataclass
class FlowSpec:
    id: str
    path: list
    connection: Optional[str] = None
    start_s: float = 0.0
    stop_s: Optional[float] = None
    message_bytes: int = 1250
    send_rate_msgs: Optional[float] = None
    traffic: str = "poisson"


@dataclass
class ScenarioConfig:
    links: list
    flows: list
    name: str = "scenario"
    seed: int = 0
    duration_s: float = 60.0
    algorithm: str = "bbr"
    alpha_mode: AlphaMode = AlphaMode.AS_PRINTED
    rtt_prime: RttPrime = RttPrime.MAX
    window_rtts: float = WINDOW_RTTS

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "algorithm": self.algorithm,
            "alpha_mode": self.alpha_mode.value,
            "rtt_prime": self.rtt_prime.value,
            "window_rtts": self.window_rtts,
            "links": [vars(l).copy() for l in self.links],
            "flows": [],
        }
        for f in self.flows:
            fd = {k: v for k, v in vars(f).items() if v is not None}
            fd["path"] = list(f.path)
            d["flows"].append(fd)
        return d

    def link(self, link_id: str) -> LinkSpec:
        for l in self.links:
            if l.id == link_id:
                return l
        raise ConfigError(f"unknown link {link_id!r}")

    def bottleneck(self, flow: FlowSpec) -> LinkSpec:
        rates = {l.id: l.rate_bps for l in self.links}
        return self.link(bottleneck_of(flow.path, rates))


def _field_path(error) -> str:
    out = ""
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigValidationError(err.message, _field_path(err))
    links = [LinkSpec(**l) for l in data["links"]]
    seen = set()
    for i, l in enumerate(links):
        if l.id in seen:
            raise ConfigValidationError(f"duplicate link id {l.id!r}", f"links[{i}].id")
        seen.add(l.id)
    flows, fseen = [], set()
    for i, fd in enumerate(data["flows"]):
        f = FlowSpec(**fd)
        f.path = list(f.path)
        if f.id in fseen:
            raise ConfigValidationError(f"duplicate flow id {f.id!r}", f"flows[{i}].id")
        fseen.add(f.id)
        for j, link_id in enumerate(f.path):
            if link_id not in seen:
                raise ConfigValidationError(f"unknown link {link_id!r}", f"flows[{i}].path[{j}]")
        if f.traffic != "bulk" and f.send_rate_msgs is None:
            raise ConfigValidationError("required unless traffic is 'bulk'", f"flows[{i}].send_rate_msgs")
        if f.stop_s is not None and f.stop_s <= f.start_s:
            raise ConfigValidationError("must be greater than start_s", f"flows[{i}].stop_s")
        flows.append(f)
    cfg = ScenarioConfig(links=links, flows=flows)
    for key in ("name", "seed", "duration_s", "algorithm", "window_rtts"):
        if key in data:
            setattr(cfg, key, data[key])
    if "alpha_mode" in data:
        cfg.alpha_mode = AlphaMode(data["alpha_mode"])
    if "rtt_prime" in data:
        cfg.rtt_prime = RttPrime(data["rtt_prime"])
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(exc.msg, line=exc.lineno) from None
    return config_from_dict(data)


def default_config(send_rate: float = 100.0, buffer_pkts: int = 50, duration_s: float = 60.0,
                   seed: int = 1) -> ScenarioConfig:
    """One Poisson message flow over a 160 msg/s bottleneck with a 300 ms RTT."""
    return config_from_dict({
        "name": "default",
        "seed": seed,
        "duration_s": duration_s,
        "links": [{"id": "bottleneck", "rate_bps": 1_600_000, "delay_ms": 150, "buffer_pkts": buffer_pkts}],
        "flows": [{"id": "f1", "path": ["bottleneck"], "message_bytes": 1250,
                   "send_rate_msgs": send_rate, "traffic": "poisson"}],
    })


def fairness_config(duration_s: float = 60.0, seed: int = 1, buffer_pkts: int = 50,
                    stagger_s: float = 2.0) -> ScenarioConfig:
    """Two identical bulk subflows of one connection sharing one bottleneck."""
    return config_from_dict({
        "name": "two-subflows",
        "seed": seed,
        "duration_s": duration_s,
        "links": [
            {"id": "access1", "rate_bps": 100_000_000, "delay_ms": 5, "buffer_pkts": 1000},
            {"id": "access2", "rate_bps": 100_000_000, "delay_ms": 5, "buffer_pkts": 1000},
            {"id": "bottleneck", "rate_bps": 1_600_000, "delay_ms": 45, "buffer_pkts": buffer_pkts},
        ],
        "flows": [
            {"id": "sf1", "path": ["access1", "bottleneck"], "connection": "c1", "traffic": "bulk"},
            {"id": "sf2", "path": ["access2", "bottleneck"], "connection": "c1", "traffic": "bulk",
             "start_s": stagger_s},
        ],
    })


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    cfg = copy.deepcopy(cfg)
    for k, v in kw.items():
        if v is None:
            continue
        if k == "alpha_mode":
            v = AlphaMode(v)
        elif k == "rtt_prime":
            v = RttPrime(v)
        setattr(cfg, k, v)
    return cfg


def arrival_times_ns(flow: FlowSpec, index: int, seed: int, duration_s: float) -> list:
    """Application message creation times in [start, stop) for a non-bulk flow."""
    rng = np.random.default_rng([seed, index])
    start = flow.start_s
    stop = min(flow.stop_s if flow.stop_s is not None else duration_s, duration_s)
    rate = flow.send_rate_msgs
    if stop <= start:
        return []
    if flow.traffic == "constant":
        phase = rng.uniform(0.0, 1.0 / rate)
        n = int(np.floor((stop - start - phase) * rate)) + 1
        times = start + phase + np.arange(n) / rate
    else:
        expected = (stop - start) * rate
        n = int(expected + 10 * np.sqrt(expected) + 20)
        times = start + np.cumsum(rng.exponential(1.0 / rate, size=n))
        while times[-1] < stop:
            more = times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=n))
            times = np.concatenate([times, more])
    times = times[times < stop]
    return [int(round(t * NS_PER_S)) for t in times]


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    stats: RunStats
    rows: list
    sim: Simulator
    groups: list = field(default_factory=list)
    independent: list = field(default_factory=list)

    @property
    def trace(self):
        return self.sim.trace

    def delivered_messages(self, flow_id: str, start_s: float, end_s: float) -> int:
        n = 0
        for r in self.rows:
            if r.flow_id == flow_id and start_s <= r.window_start < end_s:
                n += round(r.throughput * WINDOW_S)
        return n

    def throughput_bps(self, flow_id: str, start_s: float, end_s: float) -> float:
        spec = next(f for f in self.config.flows if f.id == flow_id)
        msgs = self.delivered_messages(flow_id, start_s, end_s)
        return msgs * spec.message_bytes * 8 / (end_s - start_s)

    def final_third_throughputs(self) -> dict:
        d = self.config.duration_s
        start = d - d / 3.0
        return {f.id: self.throughput_bps(f.id, start, d) for f in self.config.flows}


def run_scenario(cfg: ScenarioConfig, advisor: Optional[Callable] = None, trace: bool = False) -> ScenarioResult:
    """Run one scenario to completion. A pure function of (cfg, advisor)."""
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}")
    sim = Simulator(trace=trace)
    for l in cfg.links:
        sim.add_link(Link(l.id, l.rate_bps, l.delay_ms / 1000.0, l.buffer_pkts))
    recorder = WindowRecorder()
    coupled = cfg.algorithm in ("coupled", "coupled_ml")
    if cfg.algorithm == "coupled_ml" and advisor is None:
        from .experiments import default_advisor
        advisor = default_advisor()

    controllers = {}
    for i, f in enumerate(cfg.flows):
        for link_id in f.path:
            if link_id not in sim.links:
                raise ConfigError(f"flow {f.id!r} references missing link {link_id!r}")
        ctl_cls = CoupledController if coupled else BbrController
        ctl = ctl_cls(packet_size=f.message_bytes, seed=cfg.seed * 1000 + i)
        controllers[f.id] = ctl
        stop_s = min(f.stop_s, cfg.duration_s) if f.stop_s is not None else cfg.duration_s
        bulk = f.traffic == "bulk"
        arrivals = None if bulk else arrival_times_ns(f, i, cfg.seed, cfg.duration_s)
        flow = Flow(f.id, [sim.links[x] for x in f.path], ctl, message_bytes=f.message_bytes,
                    arrivals_ns=arrivals, bulk=bulk, start_ns=seconds_to_ns(f.start_s),
                    stop_ns=seconds_to_ns(stop_s), recorder=recorder)
        sim.add_flow(flow)
        recorder.add_flow(f.id, cfg.bottleneck(f).buffer_pkts, f.start_s, stop_s)

    groups, independent = [], [f.id for f in cfg.flows]
    if coupled:
        sets, independent = group_shared_bottlenecks(
            {l.id: l.rate_bps for l in cfg.links},
            {f.id: f.path for f in cfg.flows},
            {f.id: f.connection for f in cfg.flows if f.connection is not None},
        )
        for bset in sets:
            group = CoupledGroup(bset, cfg.alpha_mode, cfg.rtt_prime, cfg.window_rtts,
                                 advisor=advisor if cfg.algorithm == "coupled_ml" else None,
                                 block_size=cfg.link(bset.bottleneck).buffer_pkts)
            for m in bset.members:
                group.attach(m, controllers[m])
            groups.append(group)

    window_ns = recorder.window_ns
    until = seconds_to_ns(cfg.duration_s)

    def on_window(_):
        now = sim.now
        rows = recorder.close_through(now)
        if groups:
            tput = {r.flow_id: r.throughput for r in rows}
            for g in groups:
                g.control_step(now / NS_PER_S, tput)
        nxt = now + window_ns
        if nxt <= until:
            sim.schedule(nxt, EventKind.TIMER_FIRE, on_window, "window")

    sim.schedule(min(window_ns, until), EventKind.TIMER_FIRE, on_window, "window")
    stats = sim.run(until)
    recorder.close_through(until)
    return ScenarioResult(cfg, stats, list(recorder.rows), sim, groups, independent)
