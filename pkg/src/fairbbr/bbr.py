"""Single-path BBR: windowed bandwidth/RTT filters, mode state machine, pacing and cwnd.

Constants follow the original BBR design (Cardwell et al., ACM Queue 2016).
Packet loss does not feed the controller; it only costs retransmission time.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .kernels import WindowedFilter

STARTUP_GAIN = 2.0 / math.log(2.0)
DRAIN_GAIN = math.log(2.0) / 2.0
CWND_GAIN = 2.0
BASELINE_GAINS = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
CYCLE_LEN = 8
BTLBW_WINDOW_ROUNDS = 10
RTPROP_WINDOW_S = 10.0
PROBE_RTT_DURATION_S = 0.2
MIN_CWND = 4
FULL_BW_GROWTH = 1.25
FULL_BW_ROUNDS = 3
DEFAULT_PACKET_SIZE = 1250
# samples kept for the coupled controller's max{x(t)} window
DELIVERY_HISTORY_S = 30.0


class InvalidSample(ValueError):
    pass


class BbrMode(Enum):
    STARTUP = "startup"
    DRAIN = "drain"
    PROBE_BW = "probe_bw"
    PROBE_RTT = "probe_rtt"


class BtlBwFilter:
    """Max delivery rate over the last `window_length` rounds (rounds > current - window)."""

    def __init__(self, window_length: int = BTLBW_WINDOW_ROUNDS):
        self.window_length = window_length
        self._filter = WindowedFilter(True)
        self.current_round = 0

    def update(self, round_index: int, rate_bps: float) -> None:
        self.current_round = max(self.current_round, round_index)
        self._filter.update(round_index, rate_bps)
        self._filter.expire(self.current_round - self.window_length)

    def estimate(self, current_round: Optional[int] = None) -> Optional[float]:
        if current_round is None:
            current_round = self.current_round
        return self._filter.best(current_round - self.window_length)


class RtPropFilter:
    """Min RTT over the trailing `window_length` seconds (timestamps > now - window)."""

    def __init__(self, window_length: float = RTPROP_WINDOW_S):
        self.window_length = window_length
        self._filter = WindowedFilter(False)

    def update(self, timestamp: float, rtt: float) -> None:
        self._filter.update(timestamp, rtt)
        self._filter.expire(timestamp - self.window_length)

    def estimate(self, now: float) -> Optional[float]:
        return self._filter.best(now - self.window_length)


@dataclass
class BbrFlowState:
    packet_size: int = DEFAULT_PACKET_SIZE
    initial_rate_bps: float = 1_000_000.0
    seed: int = 0
    mode: BbrMode = BbrMode.STARTUP
    btlbw: BtlBwFilter = field(default_factory=BtlBwFilter)
    rtprop: RtPropFilter = field(default_factory=RtPropFilter)
    cycle_phase: int = 0
    inflight: int = 0
    pacing_gain: float = STARTUP_GAIN
    cwnd_gain: float = CWND_GAIN
    gain_cycle: tuple = BASELINE_GAINS
    round_count: int = 0
    now: float = 0.0
    full_bw: float = 0.0
    full_bw_count: int = 0
    filled_pipe: bool = False
    cycle_stamp: float = 0.0
    rtprop_stamp: float = 0.0
    probe_rtt_done_stamp: Optional[float] = None
    probe_rtt_round: int = 0
    probe_rtt_round_done: bool = False
    # (time, rate) samples behind max{x(t)}, t in [T - W, T]
    max_delivery_window: WindowedFilter = field(default_factory=lambda: WindowedFilter(True))
    # per-round RTT maxima behind the coupled controller's RTT'
    rtt_max_window: WindowedFilter = field(default_factory=lambda: WindowedFilter(True))
    rng: random.Random = None

    def __post_init__(self):
        if self.rng is None:
            self.rng = random.Random(self.seed)

    def btlbw_estimate(self) -> Optional[float]:
        return self.btlbw.estimate(self.round_count)

    def rtprop_estimate(self) -> Optional[float]:
        return self.rtprop.estimate(self.now)

    def max_rtt(self) -> Optional[float]:
        return self.rtt_max_window.best(self.round_count - BTLBW_WINDOW_ROUNDS)

    def max_delivery_rate(self, window: float) -> Optional[float]:
        return self.max_delivery_window.best(self.now - window)


def bdp_packets(state: BbrFlowState) -> float:
    """BtlBW x RTprop in packets; 0 while either estimate is missing."""
    bw = state.btlbw_estimate()
    rt = state.rtprop_estimate()
    if bw is None or rt is None:
        return 0.0
    return bw * rt / (state.packet_size * 8)


def pacing_rate(state: BbrFlowState) -> float:
    bw = state.btlbw_estimate()
    if bw is None:
        return state.initial_rate_bps
    return state.pacing_gain * bw


def cwnd(state: BbrFlowState) -> int:
    if state.mode is BbrMode.PROBE_RTT:
        return MIN_CWND
    target = state.cwnd_gain * bdp_packets(state)
    return max(math.ceil(target - 1e-9), MIN_CWND)


def enter_startup(state: BbrFlowState) -> None:
    state.mode = BbrMode.STARTUP
    state.pacing_gain = STARTUP_GAIN
    state.cwnd_gain = CWND_GAIN


def enter_drain(state: BbrFlowState) -> None:
    state.mode = BbrMode.DRAIN
    state.pacing_gain = DRAIN_GAIN
    state.cwnd_gain = CWND_GAIN


def enter_probe_bw(state: BbrFlowState, now: float, phase: Optional[int] = None) -> None:
    """Start gain cycling at a random phase other than the 0.75 drain phase."""
    state.mode = BbrMode.PROBE_BW
    state.cwnd_gain = CWND_GAIN
    if phase is None:
        phase = state.rng.choice((0, 2, 3, 4, 5, 6, 7))
    state.cycle_phase = phase
    state.cycle_stamp = now
    state.pacing_gain = state.gain_cycle[phase]


def enter_probe_rtt(state: BbrFlowState) -> None:
    state.mode = BbrMode.PROBE_RTT
    state.pacing_gain = 1.0
    state.probe_rtt_done_stamp = None
    state.probe_rtt_round_done = False


def advance_cycle(state: BbrFlowState, now: float) -> BbrFlowState:
    """Move to the next ProbeBW gain phase once a full RTprop has elapsed in this one."""
    if state.mode is not BbrMode.PROBE_BW:
        return state
    rt = state.rtprop.estimate(now)
    if rt is not None and now - state.cycle_stamp > rt:
        state.cycle_phase = (state.cycle_phase + 1) % CYCLE_LEN
        state.cycle_stamp = now
    state.pacing_gain = state.gain_cycle[state.cycle_phase]
    return state


def _check_full_pipe(state: BbrFlowState, round_start: bool, app_limited: bool) -> None:
    if state.filled_pipe or not round_start or app_limited:
        return
    bw = state.btlbw_estimate() or 0.0
    if bw >= state.full_bw * FULL_BW_GROWTH:
        state.full_bw = bw
        state.full_bw_count = 0
        return
    state.full_bw_count += 1
    if state.full_bw_count >= FULL_BW_ROUNDS:
        state.filled_pipe = True


def _handle_probe_rtt(state: BbrFlowState, now: float) -> None:
    if state.mode is not BbrMode.PROBE_RTT and now - state.rtprop_stamp > RTPROP_WINDOW_S:
        enter_probe_rtt(state)
    if state.mode is not BbrMode.PROBE_RTT:
        return
    if state.probe_rtt_done_stamp is None:
        if state.inflight <= MIN_CWND:
            state.probe_rtt_done_stamp = now + PROBE_RTT_DURATION_S
            state.probe_rtt_round = state.round_count
            state.probe_rtt_round_done = False
        return
    if state.round_count > state.probe_rtt_round:
        state.probe_rtt_round_done = True
    if state.probe_rtt_round_done and now >= state.probe_rtt_done_stamp:
        state.rtprop_stamp = now
        if state.filled_pipe:
            enter_probe_bw(state, now)
        else:
            enter_startup(state)


def on_ack(state: BbrFlowState, rtt_sample: float, delivery_rate: Optional[float], now: float,
           *, round_start: bool = True, app_limited: bool = False) -> BbrFlowState:
    """Fold one ACK's RTT and delivery-rate samples into the state (mutated and returned).

    `delivery_rate` may be None when the ACK produced no valid rate sample.
    Each call counts as a new round unless round_start is False. state.inflight must
    already reflect the ACK.
    """
    if not rtt_sample > 0:
        raise InvalidSample(f"rtt sample must be > 0, got {rtt_sample}")
    if delivery_rate is not None and delivery_rate < 0:
        raise InvalidSample(f"delivery rate must be >= 0, got {delivery_rate}")
    state.now = now
    if round_start:
        state.round_count += 1

    if delivery_rate is not None:
        current = state.btlbw.estimate(state.round_count)
        if not app_limited or current is None or delivery_rate >= current:
            state.btlbw.update(state.round_count, delivery_rate)
        state.max_delivery_window.update(now, delivery_rate)
        state.max_delivery_window.expire(now - DELIVERY_HISTORY_S)
    state.rtt_max_window.update(state.round_count, rtt_sample)
    state.rtt_max_window.expire(state.round_count - BTLBW_WINDOW_ROUNDS)

    prev_min = state.rtprop.estimate(now)
    state.rtprop.update(now, rtt_sample)
    if prev_min is None or rtt_sample <= prev_min:
        state.rtprop_stamp = now

    advance_cycle(state, now)
    _check_full_pipe(state, round_start, app_limited)
    if state.mode is BbrMode.STARTUP and state.filled_pipe:
        enter_drain(state)
    if state.mode is BbrMode.DRAIN and state.inflight <= bdp_packets(state):
        enter_probe_bw(state, now)
    _handle_probe_rtt(state, now)
    return state


class BbrController:
    """Adapter exposing a BbrFlowState to simcore.Flow."""

    def __init__(self, packet_size: int = DEFAULT_PACKET_SIZE, seed: int = 0,
                 initial_rate_bps: Optional[float] = None):
        if initial_rate_bps is None:
            # initial window of MIN_CWND packets paced over 10 ms
            initial_rate_bps = MIN_CWND * packet_size * 8 / 0.01
        self.state = BbrFlowState(packet_size=packet_size, initial_rate_bps=initial_rate_bps, seed=seed)

    def on_ack(self, rtt_s, rate_bps, now_s, round_start, app_limited, inflight):
        self.state.inflight = inflight
        on_ack(self.state, rtt_s, rate_bps, now_s, round_start=round_start, app_limited=app_limited)

    def pacing_rate_bps(self, now_s, inflight):
        return pacing_rate(self.state)

    def cwnd_packets(self):
        return cwnd(self.state)
