"""Shared-bottleneck coupled BBR, Jain's index and the ML-advised alpha loop.

Subflows of one connection whose paths share the same capacity-limiting link form
a shared-bottleneck set. Inside a set, the ProbeBW gain vector becomes
[1.25, 0.75, a, a, a, a, a, a] and the paced rate is gain * max{x(t)} over a
trailing window, paused while more than one BDP is in flight. Every other subflow
runs plain BBR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from . import bbr
from .bbr import BbrController, BbrMode
from .measurement import LatencyClass
from .simcore import ConfigError

ALPHA_MIN = 0.05
ALPHA_MAX = 1.0
ML_UP = 1.1
ML_DOWN = 0.9
WINDOW_RTTS = 10.0
CONTROL_INTERVAL_S = 1.0


class EmptySet(ValueError):
    pass


class NonPositiveBandwidth(ValueError):
    pass


class InvalidRtt(ValueError):
    pass


class AlphaOutOfRange(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class AllZero(ValueError):
    pass


class MissingPrediction(KeyError):
    pass


class AlphaMode(Enum):
    AS_PRINTED = "as_printed"
    PER_SUBFLOW = "per_subflow"


class RttPrime(Enum):
    MAX = "max"
    MIN = "min"


@dataclass
class SharedBottleneckSet:
    set_id: str
    members: list
    bottleneck: Optional[str] = None

    def __post_init__(self):
        if not self.members:
            raise EmptySet(f"set {self.set_id} has no members")

    @property
    def n_i(self) -> int:
        return len(self.members)

    @property
    def initial_alpha(self) -> float:
        return 1.0 / self.n_i


@dataclass
class SubflowFairState:
    alpha: float = 1.0
    bdp: int = 0
    rtt_max: float = 0.0
    max_rate: float = 0.0
    gain_vector: tuple = bbr.BASELINE_GAINS
    paced_rate: float = 0.0


def bottleneck_of(path, link_rates) -> str:
    """First link on the path with the minimum rate."""
    best = None
    for link_id in path:
        if link_id not in link_rates:
            raise ConfigError(f"path references unknown link {link_id!r}")
        if best is None or link_rates[link_id] < link_rates[best]:
            best = link_id
    if best is None:
        raise ConfigError("empty path")
    return best


def group_shared_bottlenecks(link_rates: dict, subflow_paths: dict, connections: Optional[dict] = None):
    """Group subflows by (connection, bottleneck link) from topology ground truth.

    link_rates maps link id -> bits/s; subflow_paths maps subflow id -> list of link
    ids. Groups of two or more become SharedBottleneckSets; singletons are returned as
    independent subflows that run plain BBR.
    """
    groups: dict = {}
    for sid, path in subflow_paths.items():
        try:
            link = bottleneck_of(path, link_rates)
        except ConfigError as exc:
            raise ConfigError(f"subflow {sid!r}: {exc}") from None
        conn = connections.get(sid) if connections else None
        groups.setdefault((conn, link), []).append(sid)
    sets, independent = [], []
    for (conn, link), members in groups.items():
        if len(members) >= 2:
            set_id = f"{conn}:{link}" if conn is not None else link
            sets.append(SharedBottleneckSet(set_id, list(members), link))
        else:
            independent.extend(members)
    return sets, independent


def compute_alpha(members, btlbw_by_subflow: dict, mode: AlphaMode = AlphaMode.AS_PRINTED) -> dict:
    members = list(members.members if isinstance(members, SharedBottleneckSet) else members)
    if not members:
        raise EmptySet("cannot compute alpha for an empty set")
    rates = {}
    for m in members:
        bw = btlbw_by_subflow.get(m)
        if bw is None or not bw > 0:
            raise NonPositiveBandwidth(f"subflow {m!r} has no positive BtlBW estimate ({bw})")
        rates[m] = bw
    total = sum(rates.values())
    if mode is AlphaMode.AS_PRINTED:
        alpha = max(rates.values()) / total
        return {m: alpha for m in members}
    return {m: rates[m] / total for m in members}


def compute_bdp(max_rate: float, rtt_max: float, packet_size_bits: float = bbr.DEFAULT_PACKET_SIZE * 8) -> int:
    if not rtt_max > 0:
        raise InvalidRtt(f"RTT' must be > 0, got {rtt_max}")
    if max_rate < 0:
        raise ValueError(f"max rate must be >= 0, got {max_rate}")
    return max(0, math.ceil(max_rate * rtt_max / packet_size_bits - 1e-9))


def coupled_pacing_rate(gain: float, max_rate: float, inflight: float, bdp: float) -> float:
    if inflight <= bdp:
        return gain * max_rate
    return 0.0


def gain_vector(alpha: float) -> tuple:
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must be in (0, 1], got {alpha}")
    return (1.25, 0.75) + (alpha,) * 6


def jain_index(throughputs) -> float:
    xs = [float(x) for x in throughputs]
    if not xs:
        raise EmptyInput("jain index of an empty list")
    if any(x < 0 for x in xs):
        raise ValueError("throughputs must be >= 0")
    total = sum(xs)
    if total == 0:
        raise AllZero("jain index undefined when every throughput is zero")
    # scale first so huge bit rates do not overflow the squares
    peak = max(xs)
    xs = [x / peak for x in xs]
    total = sum(xs)
    return total * total / (len(xs) * sum(x * x for x in xs))


def ml_advise_alpha(alpha_map: dict, latency_predictions: dict, throughput_shares: dict,
                    alpha_min: float = ALPHA_MIN, alpha_max: float = ALPHA_MAX) -> dict:
    """One control-interval adjustment of per-subflow alphas from predicted latency class.

    A subflow predicted High that gets less than its fair share 1/n is raised by 10%;
    one predicted Low that gets more than 1/n is lowered by 10%. Results are clamped
    to [alpha_min, alpha_max].
    """
    n = len(alpha_map)
    fair = 1.0 / n if n else 0.0
    out = {}
    for sid, alpha in alpha_map.items():
        if sid not in latency_predictions:
            raise MissingPrediction(sid)
        pred = latency_predictions[sid]
        share = throughput_shares.get(sid, fair)
        if pred is LatencyClass.HIGH and share < fair:
            alpha = min(alpha * ML_UP, alpha_max)
        elif pred is LatencyClass.LOW and share > fair:
            alpha = max(alpha * ML_DOWN, alpha_min)
        out[sid] = min(max(alpha, alpha_min), alpha_max)
    return out


class CoupledGroup:
    """Runtime coordinator for one shared-bottleneck set inside a simulation."""

    def __init__(self, bset: SharedBottleneckSet, alpha_mode: AlphaMode = AlphaMode.AS_PRINTED,
                 rtt_prime: RttPrime = RttPrime.MAX, window_rtts: float = WINDOW_RTTS,
                 advisor: Optional[Callable] = None, block_size: int = 0):
        self.set = bset
        self.alpha_mode = alpha_mode
        self.rtt_prime = rtt_prime
        self.window_rtts = window_rtts
        self.advisor = advisor
        self.block_size = block_size
        self.controllers: dict = {}
        self.ml_factor = {m: 1.0 for m in bset.members}
        self.alpha_history: list = []

    def attach(self, subflow_id: str, controller: "CoupledController") -> None:
        if subflow_id not in self.set.members:
            raise ConfigError(f"{subflow_id!r} is not in set {self.set.set_id}")
        self.controllers[subflow_id] = controller
        controller.group = self
        controller.subflow_id = subflow_id

    def base_alphas(self) -> dict:
        estimates = {m: c.state.btlbw_estimate() for m, c in self.controllers.items()}
        if len(estimates) < self.set.n_i or any(v is None or v <= 0 for v in estimates.values()):
            return {m: self.set.initial_alpha for m in self.set.members}
        return compute_alpha(self.set.members, estimates, self.alpha_mode)

    def alphas(self) -> dict:
        base = self.base_alphas()
        return {m: min(max(base[m] * self.ml_factor[m], ALPHA_MIN), ALPHA_MAX) for m in base}

    def alpha_for(self, subflow_id: str) -> float:
        return self.alphas()[subflow_id]

    def control_step(self, now: float, throughputs: dict) -> None:
        """Apply the ML advice once, given each member's delivered msgs/s last interval."""
        if self.advisor is None:
            return
        total = sum(throughputs.get(m, 0.0) for m in self.set.members)
        if total <= 0:
            return
        shares = {m: throughputs.get(m, 0.0) / total for m in self.set.members}
        preds = {m: self.advisor(self.block_size, throughputs.get(m, 0.0)) for m in self.set.members}
        base = self.base_alphas()
        current = self.alphas()
        advised = ml_advise_alpha(current, preds, shares)
        for m in self.set.members:
            self.ml_factor[m] = advised[m] / base[m]
        self.alpha_history.append((now, dict(advised)))


class CoupledController(BbrController):
    """BBR whose ProbeBW pacing follows the coupled rule when it belongs to a set."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.group: Optional[CoupledGroup] = None
        self.subflow_id: Optional[str] = None
        self.fair = SubflowFairState()

    def rtt_prime(self) -> Optional[float]:
        if self.group is not None and self.group.rtt_prime is RttPrime.MIN:
            return self.state.rtprop_estimate()
        return self.state.max_rtt()

    def pacing_rate_bps(self, now_s, inflight):
        s = self.state
        group = self.group
        if group is None or s.mode is not BbrMode.PROBE_BW:
            return bbr.pacing_rate(s)
        alpha = group.alpha_for(self.subflow_id)
        if group.set.n_i == 1 and alpha == 1.0:
            return bbr.pacing_rate(s)
        gains = gain_vector(alpha)
        s.gain_cycle = gains
        gain = gains[s.cycle_phase]
        s.pacing_gain = gain
        rtt_p = self.rtt_prime()
        if rtt_p is None or rtt_p <= 0:
            return bbr.pacing_rate(s)
        s.now = now_s
        max_rate = s.max_delivery_rate(group.window_rtts * rtt_p)
        if max_rate is None:
            return bbr.pacing_rate(s)
        bdp = compute_bdp(max_rate, rtt_p, s.packet_size * 8)
        rate = coupled_pacing_rate(gain, max_rate, inflight, bdp)
        f = self.fair
        f.alpha, f.bdp, f.rtt_max, f.max_rate, f.gain_vector, f.paced_rate = alpha, bdp, rtt_p, max_rate, gains, rate
        return rate
