"""Deterministic discrete-event core: the event loop, disc-model radio
medium with partially-overlapped-channel corruption, the RTS/CTS + backoff
exchange machinery, hello probing, on-demand route establishment, and a
reliable windowed transport that generates RTT-measurable traffic.

Determinism contract: one seeded generator drives every draw, events
dispatch in (time, insertion ordinal) order, and all container iteration is
in sorted key order, so identical (config, seed) reproduces the run
byte for byte.

Control frames (route request/reply floods) travel out of band at a fixed
per-hop latency; only data, acknowledgements, and hello probes contend for
the simulated spectrum.  This keeps hop-count discovery exactly equal to
shortest-hop paths on the connectivity graph while every routing METRIC is
still measured in band.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import mac as mac_mod
from .channel import DEFAULT_PROFILE, PclTable
from .config import ScenarioConfig
from .mac import (
    BackoffOutcome,
    DIFS,
    EnqueueResult,
    Frame,
    FrameKind,
    MacRadioState,
    SIFS,
    SLOT_TIME,
    RETRY_LIMIT,
    RTS_BYTES,
    CTS_BYTES,
    MAC_ACK_BYTES,
    RtsDecision,
    SimulationFault,
    rts_handler,
    weighted_hop_cost,
)
from .metrics import FlowStats, RunSummary, summarize
from .routing import (
    HELLO_INTERVAL,
    HELLO_TIMEOUT,
    ROUTE_LIFETIME,
    DISCOVERY_ATTEMPTS,
    DISCOVERY_TIMEOUT,
    NeighborRecord,
    NoRouteError,
    RouteEntry,
    RouteMetric,
    RouteTable,
    RttEstimator,
    aodv_discover,
    cumulative_rtt,
    process_hello,
    rtt_sample,
)
from .topology import (
    INTERFERENCE_RANGE_M,
    Topology,
    build_topology,
    resolve_flows,
)

CONTROL_HOP_LATENCY_S = 0.001
FLOW_START_S = 3.0
HELLO_BYTES = 32
TRANSPORT_ACK_BYTES = 40
TRANSPORT_RETRY_LIMIT = 7
RTO_INITIAL_S = 1.0
RTO_MIN_S = 0.1
RTO_MAX_S = 10.0
BEACON_INTERVAL_S = 5.0
ROUTE_REEVAL_S = 5.0
# a candidate route must beat the current one by this factor before a
# re-evaluation switches; near-ties would otherwise flap on sample noise
REROUTE_GAIN = 0.8
TIMEOUT_SLACK_S = 2 * SLOT_TIME


class Jammer:
    """Analytic periodic interferer: on for on_s, silent for off_s, from t=0."""

    def __init__(self, channel: int, x: float, y: float, on_s: float, off_s: float):
        self.channel = channel
        self.x = x
        self.y = y
        self.on_s = on_s
        self.period = on_s + off_s

    def active(self, t: float) -> bool:
        return (t % self.period) < self.on_s

    def busy_end(self, t: float) -> float:
        return math.floor(t / self.period) * self.period + self.on_s

    def overlaps(self, t0: float, t1: float) -> bool:
        k = math.floor(t0 / self.period)
        while k * self.period < t1:
            start = k * self.period
            if start < t1 and start + self.on_s > t0:
                return True
            k += 1
        return False


class Transmission:
    __slots__ = ("sender", "channel", "t_start", "t_end")

    def __init__(self, sender: int, channel: int, t_start: float, t_end: float):
        self.sender = sender
        self.channel = channel
        self.t_start = t_start
        self.t_end = t_end


class Exchange:
    __slots__ = ("token", "state", "peer_radio")

    def __init__(self, token: int, state: str, peer_radio=None):
        self.token = token
        self.state = state          # "wait_cts" | "wait_ack"
        self.peer_radio = peer_radio


class RadioState:
    __slots__ = ("node_id", "index", "channel", "mac", "exchange",
                 "rx_engaged_until", "access_pending", "head_attempts",
                 "delivered_uid_from")

    def __init__(self, node_id: int, index: int, channel: int, capacity: int):
        self.node_id = node_id
        self.index = index
        self.channel = channel
        self.mac = MacRadioState(channel=channel, capacity=capacity)
        self.exchange: Optional[Exchange] = None
        self.rx_engaged_until = 0.0
        self.access_pending = False
        self.head_attempts = 0
        # last frame uid handed up, per sending node: a sender retries one
        # head frame until it pops it, so one slot per sender suffices to
        # drop the duplicates that lost acknowledgements produce
        self.delivered_uid_from: Dict[int, int] = {}


class NodeState:
    __slots__ = ("node_id", "radios", "records", "route_table", "cum_rtt_advert",
                 "pcl")

    def __init__(self, node_id: int, channels, capacity: int, use_pcl: bool):
        self.node_id = node_id
        self.radios = [RadioState(node_id, i, ch, capacity)
                       for i, ch in enumerate(channels)]
        self.records: Dict[int, NeighborRecord] = {}
        self.route_table = RouteTable()
        self.cum_rtt_advert = math.inf
        self.pcl = PclTable() if use_pcl else None


class UnackedPacket:
    __slots__ = ("seq", "first_send", "rto", "retx", "copies", "generation")

    def __init__(self, seq: int, first_send: float, rto: float):
        self.seq = seq
        self.first_send = first_send
        self.rto = rto
        self.retx = 0
        self.copies = 0
        self.generation = 0


class FlowRuntime:
    __slots__ = ("flow_id", "src", "dst", "window", "next_seq", "unacked",
                 "stats", "estimator", "rto", "blocked", "delivered_seqs",
                 "copies_injected", "copies_delivered", "copies_dropped_queue",
                 "copies_mac_discarded", "initial_hops", "final_hops")

    def __init__(self, flow_id: int, src: int, dst: int, window: int, delta: float):
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.window = window
        self.next_seq = 0
        self.unacked: Dict[int, UnackedPacket] = {}
        self.stats = FlowStats()
        self.estimator = RttEstimator(delta=delta)
        self.rto = RTO_INITIAL_S
        self.blocked = False
        self.delivered_seqs = set()
        self.copies_injected = 0
        self.copies_delivered = 0
        self.copies_dropped_queue = 0
        self.copies_mac_discarded = 0
        self.initial_hops: Optional[int] = None
        self.final_hops: Optional[int] = None


@dataclass
class SimResult:
    summary: RunSummary
    flow_stats: List[FlowStats]
    n_nodes: int
    n_hops: Optional[int]
    trace_hash: str
    corrupted_receptions: int
    dispatched_events: int
    link_costs: Dict[Tuple[int, int], float]
    route_rows: List[Tuple[int, RouteEntry]]
    counters: Dict[str, float]


class Sim:
    """One scenario phase: a full packet-level run under a single metric."""

    def __init__(self, config: ScenarioConfig, metric: RouteMetric,
                 protocol_label: str, topology: Optional[Topology] = None,
                 seed_link_costs: Optional[Dict[Tuple[int, int], float]] = None,
                 trace_file=None):
        self.config = config
        self.metric = metric
        self.protocol_label = protocol_label
        self.topo = topology if topology is not None else build_topology(config)
        self.rng = random.Random(config.seed)
        self.now = 0.0
        self._heap: List[tuple] = []
        self._ordinal = 0
        self._uid = 0
        self._hash = hashlib.sha256()
        self._trace_file = trace_file
        self.dispatched = 0
        self.corrupted_receptions = 0
        self.counters: Dict[str, float] = {
            "route_misses": 0, "hello_queue_drops": 0, "mac_discards": 0,
            "weighted_hop_cost_sum_ms": 0.0, "weighted_hop_cost_n": 0,
        }

        self.factor = [[DEFAULT_PROFILE.factor_for_separation(abs(a - b))
                        for b in range(12)] for a in range(12)]
        self.theta = config.theta
        self.rate = config.data_rate_bps
        self.rts_decide = rts_handler(config.traffic_class)
        self.rts_mode = config.rts_mode

        use_pcl = config.channel_plan == "pcl"
        self.nodes: Dict[int, NodeState] = {
            n.node_id: NodeState(n.node_id, n.channels, config.queue_capacity, use_pcl)
            for n in self.topo.nodes
        }
        self.positions = {n.node_id: (n.x, n.y) for n in self.topo.nodes}
        self.active_tx: List[Transmission] = []

        self.jammer = None
        if config.jammer_channel is not None:
            self.jammer = Jammer(config.jammer_channel, config.jammer_x,
                                 config.jammer_y, config.jammer_on_s,
                                 config.jammer_off_s)

        self.flows: Dict[int, FlowRuntime] = {}
        for i, (src, dst) in enumerate(resolve_flows(config, self.topo)):
            self.flows[i] = FlowRuntime(i, src, dst, config.window, config.delta)

        self._pending_discovery: Dict[Tuple[int, int], int] = {}
        self._flow_paths: Dict[Tuple[int, int], Tuple[int, ...]] = {}
        self._reeval_at: Dict[Tuple[int, int], float] = {}
        self._route_seq = 0
        self._token = 0

        if seed_link_costs:
            for (u, v), cost_ms in seed_link_costs.items():
                node = self.nodes.get(u)
                if node is None or v not in self.topo.comm_adjacency.get(u, ()):
                    continue
                rec = node.records.get(v)
                if rec is None:
                    rec = NeighborRecord(neighbor=v, last_hello_at=-1e9)
                    node.records[v] = rec
                rec.link_estimator.update(cost_ms)

    # -- plumbing ---------------------------------------------------------

    def schedule(self, t: float, label: str, node: int, fn, *args):
        if t < self.now:
            raise SimulationFault(f"scheduling into the past: {t} < {self.now}")
        heapq.heappush(self._heap, (t, self._ordinal, label, node, fn, args))
        self._ordinal += 1

    def _dist(self, u: int, v: int) -> float:
        return self.topo.distance(u, v)

    def _air(self, size_bytes: int) -> float:
        return size_bytes * 8 / self.rate

    def _new_uid(self) -> int:
        self._uid += 1
        return self._uid

    def _radio_on_channel(self, node_id: int, channel: int) -> Optional[RadioState]:
        for r in self.nodes[node_id].radios:
            if r.channel == channel:
                return r
        return None

    # -- medium -----------------------------------------------------------

    def _register_tx(self, sender: int, channel: int, t_start: float, t_end: float) -> Transmission:
        tx = Transmission(sender, channel, t_start, t_end)
        self.active_tx.append(tx)
        if len(self.active_tx) > 64:
            cutoff = self.now - 0.02
            self.active_tx = [t for t in self.active_tx if t.t_end > cutoff]
        return tx

    def _jam_dist(self, node_id: int) -> float:
        x, y = self.positions[node_id]
        return math.hypot(x - self.jammer.x, y - self.jammer.y)

    def carrier_busy(self, node_id: int, channel: int) -> Tuple[bool, float]:
        busy = False
        free_at = self.now
        for tx in self.active_tx:
            if tx.t_start <= self.now < tx.t_end \
                    and self.factor[tx.channel][channel] > self.theta \
                    and self._dist(tx.sender, node_id) <= INTERFERENCE_RANGE_M:
                busy = True
                free_at = max(free_at, tx.t_end)
        if self.jammer is not None and self.jammer.active(self.now) \
                and self.factor[self.jammer.channel][channel] > self.theta \
                and self._jam_dist(node_id) <= INTERFERENCE_RANGE_M:
            busy = True
            free_at = max(free_at, self.jammer.busy_end(self.now))
        return busy, free_at

    def corrupted(self, node_id: int, channel: int, subject: Transmission) -> bool:
        for tx in self.active_tx:
            if tx is subject:
                continue
            if tx.t_start < subject.t_end and tx.t_end > subject.t_start \
                    and self.factor[tx.channel][channel] > self.theta \
                    and self._dist(tx.sender, node_id) <= INTERFERENCE_RANGE_M:
                return True
        if self.jammer is not None \
                and self.factor[self.jammer.channel][channel] > self.theta \
                and self._jam_dist(node_id) <= INTERFERENCE_RANGE_M \
                and self.jammer.overlaps(subject.t_start, subject.t_end):
            return True
        return False

    def _note_corruption(self):
        self.corrupted_receptions += 1

    # -- MAC access machinery ----------------------------------------------

    def kick(self, radio: RadioState, delay: float = 0.0):
        if radio.exchange is not None or radio.access_pending or not radio.mac.queue:
            return
        radio.access_pending = True
        self.schedule(self.now + delay, "TimerFire", radio.node_id,
                      self._try_access, radio)

    def _link_channel(self, u: int, v: int) -> Optional[int]:
        """Lowest channel both nodes currently have a radio on, or None."""
        mine = {r.channel for r in self.nodes[u].radios}
        theirs = {r.channel for r in self.nodes[v].radios}
        shared = mine & theirs
        return min(shared) if shared else None

    def _enqueue(self, node_id: int, frame: Frame) -> bool:
        """Queue a frame on the radio that talks to frame.dst; False on drop."""
        channel = self._link_channel(node_id, frame.dst)
        if channel is None:
            return False
        radio = self._radio_on_channel(node_id, channel)
        if radio is None:
            return False
        frame.src = node_id
        frame.channel = channel
        result = radio.mac.enqueue(frame, self.now)
        if result is EnqueueResult.DROPPED_QUEUE_FULL:
            return False
        self.kick(radio)
        return True

    def _backoff_wait(self, radio: RadioState) -> float:
        return DIFS + self.rng.randint(0, radio.mac.backoff.cw) * SLOT_TIME

    def _try_access(self, radio: RadioState):
        radio.access_pending = False
        if radio.exchange is not None or not radio.mac.queue:
            return
        if self.now < radio.rx_engaged_until:
            radio.access_pending = True
            self.schedule(radio.rx_engaged_until + self._backoff_wait(radio),
                          "TimerFire", radio.node_id, self._try_access, radio)
            return
        busy, free_at = self.carrier_busy(radio.node_id, radio.channel)
        if busy:
            radio.access_pending = True
            self.schedule(max(free_at, self.now) + self._backoff_wait(radio),
                          "TimerFire", radio.node_id, self._try_access, radio)
            return
        entry = radio.mac.head()
        frame = entry.frame
        peer = self._radio_on_channel(frame.dst, radio.channel)
        self._token += 1
        radio.exchange = Exchange(self._token, "wait_cts")
        radio.head_attempts += 1
        rts_air = self._air(RTS_BYTES)
        tx = self._register_tx(radio.node_id, radio.channel, self.now, self.now + rts_air)
        if peer is not None:
            self.schedule(tx.t_end, "FrameArrival", frame.dst,
                          self._rts_arrival, peer, radio, tx, frame)
        deadline = tx.t_end + SIFS + self._air(CTS_BYTES) + TIMEOUT_SLACK_S
        self.schedule(deadline, "TimerFire", radio.node_id,
                      self._exchange_timeout, radio, self._token, "wait_cts")

    def _rts_arrival(self, rx_radio: RadioState, tx_radio: RadioState,
                     tx: Transmission, frame: Frame):
        if self.corrupted(rx_radio.node_id, rx_radio.channel, tx):
            self._note_corruption()
            return
        if rx_radio.exchange is not None or self.now < rx_radio.rx_engaged_until:
            return
        active = sorted(r.channel for r in self.nodes[rx_radio.node_id].radios
                        if r is not rx_radio
                        and (r.exchange is not None or r.rx_engaged_until > self.now))
        if active and self.rts_decide(rx_radio.channel, active,
                                      mode=self.rts_mode) is RtsDecision.DEFER:
            return
        data_air = self._air(frame.size_bytes)
        ack_air = self._air(MAC_ACK_BYTES)
        cts_air = self._air(CTS_BYTES)
        rx_radio.rx_engaged_until = (self.now + SIFS + cts_air + SIFS + data_air
                                     + SIFS + ack_air + TIMEOUT_SLACK_S)
        cts = self._register_tx(rx_radio.node_id, rx_radio.channel,
                                self.now + SIFS, self.now + SIFS + cts_air)
        self.schedule(cts.t_end, "FrameArrival", tx_radio.node_id,
                      self._cts_arrival, tx_radio, rx_radio, cts, frame)

    def _cts_arrival(self, tx_radio: RadioState, rx_radio: RadioState,
                     cts: Transmission, frame: Frame):
        if self.corrupted(tx_radio.node_id, tx_radio.channel, cts):
            self._note_corruption()
            return
        ex = tx_radio.exchange
        if ex is None or ex.state != "wait_cts":
            return
        # contention is resolved the instant the CTS lands; the data frame
        # itself leaves one guard interval later
        tx_radio.mac.release_head_to_medium(self.now)
        start = self.now + SIFS
        data_air = self._air(frame.size_bytes)
        tx = self._register_tx(tx_radio.node_id, tx_radio.channel, start, start + data_air)
        ex.state = "wait_ack"
        self.schedule(tx.t_end, "FrameArrival", rx_radio.node_id,
                      self._data_arrival, rx_radio, tx_radio, tx, frame)
        deadline = tx.t_end + SIFS + self._air(MAC_ACK_BYTES) + TIMEOUT_SLACK_S
        self.schedule(deadline, "TimerFire", tx_radio.node_id,
                      self._exchange_timeout, tx_radio, ex.token, "wait_ack")

    def _data_arrival(self, rx_radio: RadioState, tx_radio: RadioState,
                      tx: Transmission, frame: Frame):
        if self.corrupted(rx_radio.node_id, rx_radio.channel, tx):
            self._note_corruption()
            return
        ack = self._register_tx(rx_radio.node_id, rx_radio.channel,
                                self.now + SIFS, self.now + SIFS + self._air(MAC_ACK_BYTES))
        self.schedule(ack.t_end, "FrameArrival", tx_radio.node_id,
                      self._mac_ack_arrival, tx_radio, rx_radio, ack)
        if rx_radio.delivered_uid_from.get(frame.src) == frame.uid:
            return                      # retransmitted copy already handed up
        rx_radio.delivered_uid_from[frame.src] = frame.uid
        self._deliver_up(rx_radio.node_id, frame)

    def _mac_ack_arrival(self, tx_radio: RadioState, rx_radio: RadioState,
                         ack: Transmission):
        if self.corrupted(tx_radio.node_id, tx_radio.channel, ack):
            self._note_corruption()
            return
        ex = tx_radio.exchange
        if ex is None or ex.state != "wait_ack":
            return
        entry = tx_radio.mac.pop_head(self.now)
        tx_radio.mac.backoff.next(BackoffOutcome.SUCCESS, self.rng)
        if entry.frame.kind is FrameKind.DATA:
            self.counters["weighted_hop_cost_sum_ms"] += \
                weighted_hop_cost(entry.ts, self.config.alpha) * 1000.0
            self.counters["weighted_hop_cost_n"] += 1
        if tx_radio.head_attempts == 1:
            node = self.nodes[tx_radio.node_id]
            peer_id = entry.frame.dst
            rec = node.records.get(peer_id)
            if rec is None:
                rec = NeighborRecord(neighbor=peer_id, last_hello_at=-1e9)
                node.records[peer_id] = rec
            # measured from queue head so a sender's own backlog does not
            # poison the link estimate, and rescaled to the nominal data
            # size so probe samples and data samples are comparable
            raw = rtt_sample(entry.ts.t_h, self.now)
            adjust = (self._air(self.config.packet_size_bytes)
                      - self._air(entry.frame.size_bytes)) * 1000.0
            rec.link_estimator.update(raw + adjust)
        tx_radio.head_attempts = 0
        tx_radio.exchange = None
        self.kick(tx_radio, delay=DIFS)

    def _exchange_timeout(self, radio: RadioState, token: int, phase: str):
        ex = radio.exchange
        if ex is None or ex.token != token or ex.state != phase:
            return
        radio.exchange = None
        slots = radio.mac.backoff.next(BackoffOutcome.BUSY, self.rng)
        if radio.mac.backoff.retries > RETRY_LIMIT:
            entry = radio.mac.pop_head(self.now)
            radio.mac.backoff.cw = radio.mac.backoff.cw_min
            radio.mac.backoff.retries = 0
            radio.head_attempts = 0
            self.counters["mac_discards"] += 1
            flow = self.flows.get(entry.frame.flow_id)
            if flow is not None and entry.frame.kind is FrameKind.DATA:
                # a copy whose data crossed but whose acknowledgements kept
                # dying lives on at the next hop; only count a true loss
                peer = self._radio_on_channel(entry.frame.dst, radio.channel)
                crossed = (peer is not None and
                           peer.delivered_uid_from.get(radio.node_id)
                           == entry.frame.uid)
                if not crossed:
                    flow.copies_mac_discarded += 1
            self.kick(radio, delay=DIFS)
            return
        radio.access_pending = True
        self.schedule(self.now + DIFS + slots * SLOT_TIME, "TimerFire",
                      radio.node_id, self._try_access, radio)

    # -- upper layers -------------------------------------------------------

    def _deliver_up(self, node_id: int, frame: Frame):
        if frame.kind is FrameKind.HELLO:
            process_hello(self.nodes[node_id].records, frame.src,
                          frame.payload, self.now)
            return
        flow = self.flows.get(frame.flow_id)
        if flow is None:
            return
        if frame.kind is FrameKind.DATA:
            if node_id == flow.dst:
                flow.copies_delivered += 1
                if frame.seq not in flow.delivered_seqs:
                    flow.delivered_seqs.add(frame.seq)
                    flow.stats.packets_received_at_gateway += 1
                    flow.stats.bytes_received += frame.size_bytes
                    flow.stats.e2e_delays.append((self.now - frame.born) * 1000.0)
                self._send_transport_ack(flow, frame.seq, node_id)
            else:
                self._forward(flow, frame, node_id, toward=flow.dst, is_data=True)
        elif frame.kind is FrameKind.ACK:
            if node_id == flow.src:
                self._transport_ack_received(flow, frame.seq)
            else:
                self._forward(flow, frame, node_id, toward=flow.src, is_data=False)

    def _forward(self, flow: FlowRuntime, frame: Frame, node_id: int,
                 toward: int, is_data: bool):
        next_hop = self._route_next_hop(node_id, toward)
        if next_hop is None:
            self.counters["route_misses"] += 1
            if is_data:
                flow.copies_dropped_queue += 1
                flow.stats.drops_queue += 1
            return
        copy = Frame(kind=frame.kind, src=node_id, dst=next_hop, channel=0,
                     size_bytes=frame.size_bytes, flow_id=frame.flow_id,
                     seq=frame.seq, uid=frame.uid, born=frame.born,
                     payload=frame.payload)
        if not self._enqueue(node_id, copy):
            if is_data:
                flow.copies_dropped_queue += 1
                flow.stats.drops_queue += 1

    def _send_transport_ack(self, flow: FlowRuntime, seq: int, node_id: int):
        next_hop = self._route_next_hop(node_id, flow.src)
        if next_hop is None:
            self.counters["route_misses"] += 1
            return
        ack = Frame(kind=FrameKind.ACK, src=node_id, dst=next_hop, channel=0,
                    size_bytes=TRANSPORT_ACK_BYTES, flow_id=flow.flow_id,
                    seq=seq, uid=self._new_uid(), born=self.now)
        self._enqueue(node_id, ack)

    def _transport_ack_received(self, flow: FlowRuntime, seq: int):
        rec = flow.unacked.pop(seq, None)
        if rec is None:
            return
        sample = rtt_sample(rec.first_send, self.now)
        flow.stats.rtt_samples.append(sample)
        if rec.copies == 1:
            # a retransmitted packet cannot tell which copy this ack answers,
            # so only clean exchanges feed the timeout estimator
            flow.estimator.update(sample)
            flow.rto = min(max(2.0 * flow.estimator.average_rtt / 1000.0,
                               RTO_MIN_S), RTO_MAX_S)
        self._fill_window(flow)

    def _fill_window(self, flow: FlowRuntime):
        while len(flow.unacked) < flow.window:
            next_hop = self._route_next_hop(flow.src, flow.dst)
            if next_hop is None:
                flow.blocked = True
                self._request_discovery(flow.src, flow.dst)
                return
            seq = flow.next_seq
            flow.next_seq += 1
            rec = UnackedPacket(seq, self.now, flow.rto)
            flow.unacked[seq] = rec
            flow.stats.packets_sent += 1
            self._inject_copy(flow, rec, next_hop)
            self.schedule(self.now + rec.rto, "RtoExpiry", flow.src,
                          self._rto_expiry, flow, seq, rec.generation)

    def _inject_copy(self, flow: FlowRuntime, rec: UnackedPacket, next_hop: int):
        rec.copies += 1
        frame = Frame(kind=FrameKind.DATA, src=flow.src, dst=next_hop, channel=0,
                      size_bytes=self.config.packet_size_bytes,
                      flow_id=flow.flow_id, seq=rec.seq, uid=self._new_uid(),
                      born=rec.first_send)
        flow.copies_injected += 1
        if not self._enqueue(flow.src, frame):
            flow.copies_dropped_queue += 1
            flow.stats.drops_queue += 1

    def _rto_expiry(self, flow: FlowRuntime, seq: int, generation: int):
        rec = flow.unacked.get(seq)
        if rec is None or rec.generation != generation:
            return
        rec.retx += 1
        if rec.retx > TRANSPORT_RETRY_LIMIT:
            del flow.unacked[seq]
            if seq not in flow.delivered_seqs:
                flow.stats.drops_retry += 1
            self._fill_window(flow)
            return
        rec.rto = min(rec.rto * 2.0, RTO_MAX_S)
        rec.generation += 1
        next_hop = self._route_next_hop(flow.src, flow.dst)
        if next_hop is not None:
            self._inject_copy(flow, rec, next_hop)
        else:
            self._request_discovery(flow.src, flow.dst)
        self.schedule(self.now + rec.rto, "RtoExpiry", flow.src,
                      self._rto_expiry, flow, seq, rec.generation)

    # -- routing ------------------------------------------------------------

    def _route_next_hop(self, node_id: int, dst: int) -> Optional[int]:
        table = self.nodes[node_id].route_table
        entry = table.lookup(dst, self.now)
        if entry is None:
            return None
        table.refresh(dst, self.now)
        return entry.next_hop

    def _measured_cost(self, u: int, v: int) -> float:
        rec = self.nodes[u].records.get(v)
        if rec is None or not rec.link_estimator.seeded \
                or not rec.is_active(self.now):
            return math.inf
        return rec.link_estimator.average_rtt

    def _request_discovery(self, src: int, dst: int):
        key = (src, dst)
        if key in self._pending_discovery:
            return
        self._pending_discovery[key] = 0
        self._attempt_discovery(src, dst)

    def _attempt_discovery(self, src: int, dst: int):
        key = (src, dst)
        self._pending_discovery[key] = self._pending_discovery.get(key, 0) + 1
        adjacency = self.topo.comm_adjacency
        path = None
        try:
            if self.metric is RouteMetric.AVG_RTT:
                try:
                    path = aodv_discover(adjacency, src, dst, RouteMetric.AVG_RTT,
                                         link_cost=self._measured_cost)
                except NoRouteError:
                    path = aodv_discover(adjacency, src, dst, RouteMetric.HOP_COUNT)
            else:
                path = aodv_discover(adjacency, src, dst, RouteMetric.HOP_COUNT)
        except NoRouteError:
            if self._pending_discovery[key] < DISCOVERY_ATTEMPTS:
                self.schedule(self.now + DISCOVERY_TIMEOUT, "TimerFire", src,
                              self._attempt_discovery, src, dst)
            else:
                del self._pending_discovery[key]
            return
        latency = 2 * (len(path) - 1) * CONTROL_HOP_LATENCY_S
        self.schedule(self.now + latency, "TimerFire", src,
                      self._install_route, src, dst, tuple(path))

    def _install_route(self, src: int, dst: int, path: Tuple[int, ...]):
        self._pending_discovery.pop((src, dst), None)
        self._route_seq += 1
        expiry = self.now + ROUTE_LIFETIME
        total = len(path) - 1
        for i, node_id in enumerate(path):
            table = self.nodes[node_id].route_table
            if i < total:
                cost = sum(c for c in (self._measured_cost(path[j], path[j + 1])
                                       for j in range(i, total))
                           if not math.isinf(c))
                table.install(RouteEntry(destination=dst, next_hop=path[i + 1],
                                         hop_count=total - i, rtt_cost=cost,
                                         seq_no=self._route_seq, expires_at=expiry))
            if i > 0:
                cost = sum(c for c in (self._measured_cost(path[j + 1], path[j])
                                       for j in range(0, i))
                           if not math.isinf(c))
                table.install(RouteEntry(destination=src, next_hop=path[i - 1],
                                         hop_count=i, rtt_cost=cost,
                                         seq_no=self._route_seq, expires_at=expiry))
        self._flow_paths[(src, dst)] = path
        matched = False
        for fid in sorted(self.flows):
            flow = self.flows[fid]
            if flow.src == src and flow.dst == dst:
                matched = True
                if flow.initial_hops is None:
                    flow.initial_hops = total
                flow.final_hops = total
                if flow.blocked:
                    flow.blocked = False
                    self._fill_window(flow)
        if matched and self.metric is RouteMetric.AVG_RTT:
            # measured link costs drift, so flow routes are checked on a
            # fixed cadence instead of living forever on refresh
            self._schedule_reeval(src, dst)

    def _schedule_reeval(self, src: int, dst: int):
        # one re-evaluation chain per flow; a fresh install while a tick is
        # already pending must not fork a second chain
        when = self.now + ROUTE_REEVAL_S
        if self._reeval_at.get((src, dst), -1.0) > self.now:
            return
        self._reeval_at[(src, dst)] = when
        self.schedule(when, "TimerFire", src, self._route_reeval, src, dst)

    def _route_reeval(self, src: int, dst: int):
        if (src, dst) in self._pending_discovery:
            return
        current = self._flow_paths.get((src, dst))
        if current is None \
                or self.nodes[src].route_table.lookup(dst, self.now) is None:
            self._attempt_discovery(src, dst)
            return
        cur_cost = sum(self._measured_cost(u, v)
                       for u, v in zip(current, current[1:]))
        best = None
        try:
            best = aodv_discover(self.topo.comm_adjacency, src, dst,
                                 RouteMetric.AVG_RTT,
                                 link_cost=self._measured_cost)
        except NoRouteError:
            pass
        if best is not None and tuple(best) != current:
            new_cost = sum(self._measured_cost(u, v)
                           for u, v in zip(best, best[1:]))
            if new_cost < cur_cost * REROUTE_GAIN:
                self._attempt_discovery(src, dst)
                return
        self._schedule_reeval(src, dst)

    # -- periodic drivers -----------------------------------------------------

    def _hello_tick(self, node_id: int):
        node = self.nodes[node_id]
        node.cum_rtt_advert = cumulative_rtt(
            node_id, [node.records[k] for k in sorted(node.records)],
            self.topo.gateway, self.now)
        for v in sorted(self.topo.comm_adjacency[node_id]):
            hello = Frame(kind=FrameKind.HELLO, src=node_id, dst=v, channel=0,
                          size_bytes=HELLO_BYTES, uid=self._new_uid(),
                          born=self.now, payload=node.cum_rtt_advert)
            if not self._enqueue(node_id, hello):
                self.counters["hello_queue_drops"] += 1
        self.schedule(self.now + HELLO_INTERVAL, "HelloTick", node_id,
                      self._hello_tick, node_id)

    def _beacon_tick(self, node_id: int):
        node = self.nodes[node_id]
        node.pcl.rollover()
        choice = node.pcl.select()
        node.pcl.mark_self_selected(choice)
        for other_id in self.topo.interference_candidates[node_id]:
            other = self.nodes[other_id]
            if other.pcl is not None:
                other.pcl.mark_neighbor_took(choice)
        # the last radio follows the claimed channel once it has drained;
        # the first radio stays on its planned channel so the baseline
        # connectivity never fully disappears
        spare = node.radios[-1]
        if len(node.radios) > 1 and spare.channel != choice \
                and spare.exchange is None and not spare.mac.queue \
                and spare.rx_engaged_until <= self.now:
            spare.channel = choice
            spare.mac.channel = choice
            self.counters["pcl_retunes"] = self.counters.get("pcl_retunes", 0) + 1
        self.schedule(self.now + BEACON_INTERVAL_S, "BeaconTick", node_id,
                      self._beacon_tick, node_id)

    def _flow_start(self, flow: FlowRuntime):
        self._fill_window(flow)

    # -- run ------------------------------------------------------------------

    def _trace(self, t: float, label: str, node: int):
        line = f"{t:.9f} {label} n{node}\n"
        self._hash.update(line.encode())
        if self._trace_file is not None:
            self._trace_file.write(line)

    def run(self) -> SimResult:
        sim_time = self.config.sim_time_s
        if sim_time > 0:
            for node_id in sorted(self.nodes):
                offset = self.rng.random() * HELLO_INTERVAL
                self.schedule(offset, "HelloTick", node_id, self._hello_tick, node_id)
                if self.nodes[node_id].pcl is not None:
                    self.schedule(offset + self.rng.random() * BEACON_INTERVAL_S,
                                  "BeaconTick", node_id, self._beacon_tick, node_id)
            for flow_id in sorted(self.flows):
                self.schedule(min(FLOW_START_S, sim_time), "FlowSendWindow",
                              self.flows[flow_id].src, self._flow_start,
                              self.flows[flow_id])
        while self._heap and self._heap[0][0] <= sim_time:
            t, _, label, node, fn, args = heapq.heappop(self._heap)
            if t < self.now:
                raise SimulationFault("event clock moved backwards")
            self.now = t
            self.dispatched += 1
            self._trace(t, label, node)
            fn(*args)
        self.now = sim_time
        self._trace(sim_time, "SimEnd", -1)
        self._check_conservation()
        return self._result()

    def _check_conservation(self):
        residual = {fid: 0 for fid in self.flows}
        for node_id in sorted(self.nodes):
            for radio in self.nodes[node_id].radios:
                for entry in radio.mac.queue:
                    if entry.frame.kind is not FrameKind.DATA \
                            or entry.frame.flow_id not in residual:
                        continue
                    # skip ghosts: entries whose data already crossed this
                    # hop and lives on downstream, pending only a local ack
                    peer = self._radio_on_channel(entry.frame.dst, radio.channel)
                    if peer is not None and peer.delivered_uid_from.get(
                            node_id) == entry.frame.uid:
                        continue
                    residual[entry.frame.flow_id] += 1
        for fid, flow in self.flows.items():
            balance = (flow.copies_delivered + flow.copies_dropped_queue
                       + flow.copies_mac_discarded + residual[fid])
            if flow.copies_injected != balance:
                raise SimulationFault(
                    f"flow {fid} copy conservation broken: injected "
                    f"{flow.copies_injected} != accounted {balance}")
            flow.stats.in_flight_at_end = sum(
                1 for seq in flow.unacked if seq not in flow.delivered_seqs)
            unique = (flow.stats.packets_received_at_gateway
                      + flow.stats.drops_retry + flow.stats.in_flight_at_end)
            if flow.stats.packets_sent != unique:
                raise SimulationFault(
                    f"flow {fid} packet conservation broken: sent "
                    f"{flow.stats.packets_sent} != accounted {unique}")

    def final_link_costs(self) -> Dict[Tuple[int, int], float]:
        costs = {}
        for node_id in sorted(self.nodes):
            for v in sorted(self.nodes[node_id].records):
                rec = self.nodes[node_id].records[v]
                if rec.link_estimator.seeded:
                    costs[(node_id, v)] = rec.link_estimator.average_rtt
        return costs

    def _result(self) -> SimResult:
        stats = [self.flows[fid].stats for fid in sorted(self.flows)]
        sim_time = self.config.sim_time_s
        if sim_time > 0:
            summary = summarize(stats, sim_time, self.protocol_label)
        else:
            summary = RunSummary(0.0, None, None, None, self.protocol_label)
        first = self.flows.get(0)
        route_rows = []
        for node_id in sorted(self.nodes):
            for entry in self.nodes[node_id].route_table.rows():
                route_rows.append((node_id, entry))
        return SimResult(
            summary=summary,
            flow_stats=stats,
            n_nodes=len(self.nodes),
            n_hops=first.final_hops if first is not None else None,
            trace_hash=self._hash.hexdigest(),
            corrupted_receptions=self.corrupted_receptions,
            dispatched_events=self.dispatched,
            link_costs=self.final_link_costs(),
            route_rows=route_rows,
            counters=dict(self.counters),
        )
