"""Deterministic discrete-event engine: event queue, drop-tail links, packet senders.

Time is an integer count of nanoseconds. Events run in (time, insertion sequence)
order, so a run is a pure function of its configuration and seed.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

NS_PER_S = 1_000_000_000
MIN_RTO_NS = 10_000_000
INITIAL_RTO_NS = NS_PER_S


def seconds_to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def ns_to_seconds(ns: int) -> float:
    return ns / NS_PER_S


class SchedulingInPast(ValueError):
    pass


class ConfigError(ValueError):
    pass


class EventKind(IntEnum):
    PACKET_ARRIVAL = 0
    LINK_SERVICE_DONE = 1
    TIMER_FIRE = 2
    PACING_TICK = 3


class Admission(IntEnum):
    ACCEPTED = 0
    DROPPED = 1


@dataclass(slots=True)
class Packet:
    id: int
    flow_id: str
    size: int
    sent_at: int = 0
    is_retransmit: bool = False
    tx: int = 0
    hop: int = 0
    # delivery-rate snapshot taken when the packet left the sender
    delivered: int = 0
    delivered_time: int = 0
    first_sent_time: int = 0
    app_limited: bool = False

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"packet size must be positive, got {self.size}")


class EventQueue:
    """Min-heap of (at, seq, kind, handler, arg) entries."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, at: int, kind: EventKind, handler: Callable, arg=None) -> int:
        if at < self.now:
            raise SchedulingInPast(f"event at {at} ns is before current time {self.now} ns")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (at, seq, kind, handler, arg))
        return seq

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def pop(self):
        entry = heapq.heappop(self._heap)
        self.now = entry[0]
        return entry


class Link:
    """Unidirectional link with a FIFO drop-tail buffer counted in packets.

    Occupancy counts every packet the link holds, including the one being serialized.
    """

    def __init__(self, link_id: str, rate_bps: float, prop_delay: float, buffer_capacity: int):
        if not rate_bps > 0:
            raise ConfigError(f"link {link_id}: rate must be > 0, got {rate_bps}")
        if prop_delay < 0:
            raise ConfigError(f"link {link_id}: propagation delay must be >= 0, got {prop_delay}")
        if buffer_capacity < 1:
            raise ConfigError(f"link {link_id}: buffer capacity must be >= 1, got {buffer_capacity}")
        self.id = link_id
        self.rate = float(rate_bps)
        self.prop_delay = float(prop_delay)
        self.prop_delay_ns = seconds_to_ns(prop_delay)
        self.buffer_capacity = int(buffer_capacity)
        self.queue: deque = deque()
        self.busy = False
        self.accepted = 0
        self.dropped = 0
        self.departed = 0
        self.bits_departed = 0
        self.departures: Optional[list] = None
        self._tx_cache = {}

    @property
    def occupancy(self) -> int:
        return len(self.queue)

    def tx_time_ns(self, size: int) -> int:
        t = self._tx_cache.get(size)
        if t is None:
            t = math.ceil(size * 8 * NS_PER_S / self.rate)
            self._tx_cache[size] = t
        return t


def enqueue(link: Link, packet: Packet) -> Admission:
    if len(link.queue) >= link.buffer_capacity:
        link.dropped += 1
        return Admission.DROPPED
    link.queue.append(packet)
    link.accepted += 1
    return Admission.ACCEPTED


@dataclass
class FlowCounters:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    retransmitted: int = 0
    in_flight: int = 0
    timeouts: int = 0
    messages_offered: int = 0
    messages_delivered: int = 0


@dataclass
class RunStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    retransmitted: int = 0
    in_flight: int = 0
    per_flow: dict = field(default_factory=dict)

    def summary(self) -> str:
        lines = [
            f"sent={self.sent} delivered={self.delivered} dropped={self.dropped} "
            f"retransmitted={self.retransmitted} in_flight={self.in_flight}"
        ]
        for fid, c in sorted(self.per_flow.items()):
            lines.append(
                f"  {fid}: sent={c.sent} delivered={c.delivered} dropped={c.dropped} "
                f"retransmitted={c.retransmitted} messages={c.messages_delivered}/{c.messages_offered}"
            )
        return "\n".join(lines)


class Simulator:
    def __init__(self, trace: bool = False):
        self.events = EventQueue()
        self.links: dict = {}
        self.flows: dict = {}
        self.trace: Optional[list] = [] if trace else None
        self._started = False

    @property
    def now(self) -> int:
        return self.events.now

    def schedule(self, at: int, kind: EventKind, handler: Callable, arg=None) -> int:
        return self.events.schedule(at, kind, handler, arg)

    def add_link(self, link: Link) -> Link:
        if link.id in self.links:
            raise ConfigError(f"duplicate link id {link.id!r}")
        self.links[link.id] = link
        return link

    def add_flow(self, flow: "Flow") -> "Flow":
        if flow.id in self.flows:
            raise ConfigError(f"duplicate flow id {flow.id!r}")
        self.flows[flow.id] = flow
        flow.sim = self
        return flow

    # -- packet transport -------------------------------------------------

    def forward(self, packet: Packet) -> None:
        """Hand a packet to the link at packet.hop on its flow's path."""
        flow = self.flows[packet.flow_id]
        link = flow.path[packet.hop]
        if enqueue(link, packet) is Admission.DROPPED:
            flow.on_drop(packet)
            return
        if not link.busy:
            link.busy = True
            self.schedule(self.events.now + link.tx_time_ns(packet.size),
                          EventKind.LINK_SERVICE_DONE, self._service_done, link)

    def _service_done(self, link: Link) -> None:
        packet = link.queue.popleft()
        now = self.events.now
        link.departed += 1
        link.bits_departed += packet.size * 8
        if link.departures is not None:
            link.departures.append((now, packet.flow_id, packet.tx))
        self.schedule(now + link.prop_delay_ns, EventKind.PACKET_ARRIVAL, self._hop_arrival, packet)
        if link.queue:
            self.schedule(now + link.tx_time_ns(link.queue[0].size),
                          EventKind.LINK_SERVICE_DONE, self._service_done, link)
        else:
            link.busy = False

    def _hop_arrival(self, packet: Packet) -> None:
        packet.hop += 1
        flow = self.flows[packet.flow_id]
        if packet.hop < len(flow.path):
            self.forward(packet)
        else:
            flow.on_receive(packet)

    # -- running ----------------------------------------------------------

    def _check_config(self) -> None:
        for flow in self.flows.values():
            if not flow.path:
                raise ConfigError(f"flow {flow.id!r} has an empty path")
            for link in flow.path:
                if self.links.get(link.id) is not link:
                    raise ConfigError(f"flow {flow.id!r} references missing link {link.id!r}")

    def run(self, until: int) -> RunStats:
        """Execute every event with time <= until (ns) and return the counters."""
        if not self._started:
            self._check_config()
            for flow in self.flows.values():
                flow.start()
            self._started = True
        events = self.events
        heap = events._heap
        trace = self.trace
        pop = heapq.heappop
        while heap and heap[0][0] <= until:
            at, seq, kind, handler, arg = pop(heap)
            events.now = at
            if trace is not None:
                trace.append((at, seq, int(kind), _trace_tag(arg)))
            handler(arg)
        if until > events.now:
            events.now = until
        return self.stats()

    def stats(self) -> RunStats:
        stats = RunStats()
        for fid, flow in self.flows.items():
            c = flow.counters
            stats.per_flow[fid] = FlowCounters(**vars(c))
            stats.sent += c.sent
            stats.delivered += c.delivered
            stats.dropped += c.dropped
            stats.retransmitted += c.retransmitted
            stats.in_flight += c.in_flight
        return stats


def _trace_tag(arg):
    if isinstance(arg, Packet):
        return (arg.flow_id, arg.tx, arg.hop)
    if isinstance(arg, Link):
        return arg.id
    if isinstance(arg, str):
        return arg
    return None


class Flow:
    """Sender and receiver endpoints of one (sub)flow.

    Application messages map one-to-one onto packets. The congestion controller is
    duck-typed: on_ack(rtt_s, rate_bps, now_s, round_start, app_limited, inflight),
    pacing_rate_bps(now_s, inflight) and cwnd_packets().
    Lost packets are found by a per-packet timer of max(2*srtt, 10 ms) and resent.
    """

    def __init__(self, flow_id: str, path: list, controller, message_bytes: int = 1250,
                 arrivals_ns=None, bulk: bool = False, start_ns: int = 0,
                 stop_ns: Optional[int] = None, recorder=None):
        if message_bytes <= 0:
            raise ConfigError(f"flow {flow_id}: message size must be > 0")
        if not bulk and arrivals_ns is None:
            raise ConfigError(f"flow {flow_id}: needs arrival times or bulk=True")
        self.id = flow_id
        self.path = list(path)
        self.controller = controller
        self.size = int(message_bytes)
        self.bits = self.size * 8
        self.arrivals = list(arrivals_ns) if arrivals_ns is not None else []
        self.bulk = bulk
        self.start_ns = start_ns
        self.stop_ns = stop_ns
        self.recorder = recorder
        self.sim: Optional[Simulator] = None
        self.counters = FlowCounters()
        self.reverse_delay_ns = sum(link.prop_delay_ns for link in self.path)

        self.created_at: list = []
        self.msg_acked = bytearray()
        self.msg_delivered = bytearray()
        self.pending: deque = deque()
        self.retx: deque = deque()
        self.outstanding: dict = {}
        self.inflight = 0
        self.next_tx = 0
        self._arrival_idx = 0
        self._tick_pending = False
        self.next_send_time = 0
        self.srtt: Optional[float] = None
        self.min_rtt: Optional[int] = None
        # delivery-rate estimator state
        self.delivered = 0
        self.delivered_time = 0
        self.first_sent_time = 0
        self.app_limited_mark = 0
        self.next_round_delivered = 0

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        sim = self.sim
        if self.bulk:
            sim.schedule(self.start_ns, EventKind.TIMER_FIRE, self._on_start, self.id)
        elif self.arrivals:
            sim.schedule(self.arrivals[0], EventKind.TIMER_FIRE, self._on_app_arrival, self.id)

    def _on_start(self, _):
        self.try_send()

    def _new_message(self, now: int) -> int:
        msg = len(self.created_at)
        self.created_at.append(now)
        self.msg_acked.append(0)
        self.msg_delivered.append(0)
        self.counters.messages_offered += 1
        if self.recorder is not None:
            self.recorder.sent(self.id, now)
        return msg

    def _on_app_arrival(self, _):
        now = self.sim.events.now
        self.pending.append(self._new_message(now))
        self._arrival_idx += 1
        if self._arrival_idx < len(self.arrivals):
            self.sim.schedule(self.arrivals[self._arrival_idx], EventKind.TIMER_FIRE,
                              self._on_app_arrival, self.id)
        self.try_send()

    def _bulk_active(self, now: int) -> bool:
        return self.bulk and now >= self.start_ns and (self.stop_ns is None or now < self.stop_ns)

    @property
    def rto_ns(self) -> int:
        if self.srtt is None:
            return INITIAL_RTO_NS
        return max(int(2 * self.srtt), MIN_RTO_NS)

    # -- sending ----------------------------------------------------------

    def try_send(self) -> None:
        sim = self.sim
        now = sim.events.now
        ctl = self.controller
        while True:
            if not (self.retx or self.pending or self._bulk_active(now)):
                if self.inflight < ctl.cwnd_packets():
                    self.app_limited_mark = (self.delivered + self.inflight) or 1
                return
            if self.inflight >= ctl.cwnd_packets():
                return
            rate = ctl.pacing_rate_bps(now / NS_PER_S, self.inflight)
            if rate <= 0:
                return
            if now < self.next_send_time:
                if not self._tick_pending:
                    self._tick_pending = True
                    sim.schedule(self.next_send_time, EventKind.PACING_TICK, self._on_tick, self.id)
                return
            if not self._send_one(now):
                continue
            self.next_send_time = now + math.ceil(self.bits * NS_PER_S / rate)

    def _on_tick(self, _):
        self._tick_pending = False
        self.try_send()

    def _send_one(self, now: int) -> bool:
        if self.retx:
            msg = self.retx.popleft()
            if self.msg_acked[msg]:
                return False
            is_retx = True
        elif self.pending:
            msg = self.pending.popleft()
            is_retx = False
        else:
            msg = self._new_message(now)
            is_retx = False
        if self.inflight == 0:
            self.first_sent_time = now
            self.delivered_time = now
        tx = self.next_tx
        self.next_tx += 1
        pkt = Packet(msg, self.id, self.size, now, is_retx, tx, 0,
                     self.delivered, self.delivered_time, self.first_sent_time,
                     self.app_limited_mark != 0)
        self.outstanding[tx] = pkt
        self.inflight += 1
        c = self.counters
        c.sent += 1
        c.in_flight += 1
        if is_retx:
            c.retransmitted += 1
        self.sim.schedule(now + self.rto_ns, EventKind.TIMER_FIRE, self._on_timeout, pkt)
        self.sim.forward(pkt)
        return True

    # -- network callbacks ------------------------------------------------

    def on_drop(self, packet: Packet) -> None:
        self.counters.dropped += 1
        self.counters.in_flight -= 1

    def on_receive(self, packet: Packet) -> None:
        now = self.sim.events.now
        c = self.counters
        c.delivered += 1
        c.in_flight -= 1
        if not self.msg_delivered[packet.id]:
            self.msg_delivered[packet.id] = 1
            c.messages_delivered += 1
            if self.recorder is not None:
                self.recorder.delivered(self.id, now, now - self.created_at[packet.id])
        self.sim.schedule(now + self.reverse_delay_ns, EventKind.PACKET_ARRIVAL, self._on_ack, packet)

    def _on_ack(self, pkt: Packet) -> None:
        self.msg_acked[pkt.id] = 1
        if self.outstanding.pop(pkt.tx, None) is None:
            return
        now = self.sim.events.now
        self.inflight -= 1
        rtt = now - pkt.sent_at
        if self.srtt is None:
            self.srtt = float(rtt)
        else:
            self.srtt += (rtt - self.srtt) / 8.0
        if self.min_rtt is None or rtt < self.min_rtt:
            self.min_rtt = rtt

        self.delivered += 1
        self.delivered_time = now
        if self.app_limited_mark and self.delivered > self.app_limited_mark:
            self.app_limited_mark = 0
        round_start = False
        if pkt.delivered >= self.next_round_delivered:
            self.next_round_delivered = self.delivered
            round_start = True
        interval = max(pkt.sent_at - pkt.first_sent_time, now - pkt.delivered_time)
        self.first_sent_time = pkt.sent_at
        rate = None
        if interval > 0 and interval >= self.min_rtt:
            rate = (self.delivered - pkt.delivered) * self.bits * NS_PER_S / interval
        self.controller.on_ack(rtt / NS_PER_S, rate, now / NS_PER_S, round_start,
                               pkt.app_limited, self.inflight)
        self.try_send()

    def _on_timeout(self, pkt: Packet) -> None:
        if self.outstanding.pop(pkt.tx, None) is None:
            return
        self.inflight -= 1
        self.counters.timeouts += 1
        if not self.msg_acked[pkt.id]:
            self.retx.append(pkt.id)
        self.try_send()
