"""Route state and selection: EWMA link estimation, distance-vector
cumulative RTT toward the gateway, potential-field next-hop choice, and
on-demand route discovery under hop-count or RTT metrics.

Gateway-bound forwarding treats each node's minimum summed round-trip time
to the gateway as a potential; packets flow toward the neighbor with the
least remaining potential, so converged values admit no loops.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from .mac import SimulationFault

DEFAULT_DELTA = 0.125
HELLO_INTERVAL = 1.0
HELLO_TIMEOUT = 3.0 * HELLO_INTERVAL   # three missed hellos
ROUTE_LIFETIME = 10.0
DISCOVERY_TIMEOUT = 1.0
DISCOVERY_ATTEMPTS = 3


class NoRouteError(Exception):
    """No usable path to the destination."""


class RouteMetric(enum.Enum):
    HOP_COUNT = "HopCount"
    AVG_RTT = "AvgRtt"


def rtt_sample(send_time: float, ack_time: float) -> float:
    """Round-trip sample in milliseconds from send and ACK instants (seconds)."""
    if ack_time < send_time:
        raise SimulationFault(f"ACK at {ack_time} precedes send at {send_time}")
    return (ack_time - send_time) * 1000.0


class RttEstimator:
    """Exponentially weighted RTT average.

    The configured initial value is only a standby reading: the first real
    sample replaces it outright instead of blending, so an arbitrary prior
    cannot bias early route choices.  Samples from retransmitted packets
    must not be fed in (the caller owns that exclusion).
    """

    __slots__ = ("delta", "average_rtt", "samples_seen")

    def __init__(self, delta: float = DEFAULT_DELTA, initial: Optional[float] = None):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        self.delta = delta
        self.average_rtt = initial
        self.samples_seen = 0

    @property
    def seeded(self) -> bool:
        return self.samples_seen > 0

    def update(self, sample: float) -> float:
        if sample < 0:
            raise SimulationFault(f"negative RTT sample {sample}")
        if self.samples_seen == 0:
            self.average_rtt = sample
        else:
            difference = sample - self.average_rtt
            self.average_rtt = self.average_rtt + self.delta * difference
        self.samples_seen += 1
        return self.average_rtt


def update_average_rtt(est: RttEstimator, sample: float) -> RttEstimator:
    est.update(sample)
    return est


@dataclass
class NeighborRecord:
    neighbor: int
    last_hello_at: float
    advertised_cum_rtt: float = math.inf
    link_estimator: RttEstimator = field(default_factory=RttEstimator)

    def is_active(self, now: float, timeout: float = HELLO_TIMEOUT) -> bool:
        return now - self.last_hello_at <= timeout


def process_hello(records: Dict[int, NeighborRecord], sender: int,
                  advertised_cum_rtt: float, now: float) -> NeighborRecord:
    rec = records.get(sender)
    if rec is None:
        rec = NeighborRecord(neighbor=sender, last_hello_at=now,
                             advertised_cum_rtt=advertised_cum_rtt)
        records[sender] = rec
    else:
        rec.last_hello_at = now
        rec.advertised_cum_rtt = advertised_cum_rtt
    return rec


def active_neighbors(records: Dict[int, NeighborRecord], now: float,
                     timeout: float = HELLO_TIMEOUT) -> List[NeighborRecord]:
    return [records[k] for k in sorted(records) if records[k].is_active(now, timeout)]


def cumulative_rtt(node: int, neighbors: Iterable[NeighborRecord], gateway: int,
                   now: float, hello_timeout: float = HELLO_TIMEOUT) -> float:
    """Minimum summed link RTT from this node to the gateway, in ms.

    Computed from what active neighbors advertise plus the measured link to
    each; the result is what this node advertises in turn.  Unreachable is
    reported as infinity, never as an exception, because a node with no
    usable neighbor is a steady state, not a fault.
    """
    if node == gateway:
        return 0.0
    best = math.inf
    for rec in neighbors:
        if not rec.is_active(now, hello_timeout):
            continue
        if not rec.link_estimator.seeded or math.isinf(rec.advertised_cum_rtt):
            continue
        best = min(best, rec.link_estimator.average_rtt + rec.advertised_cum_rtt)
    return best


@dataclass
class PotentialField:
    value_by_node: Dict[int, float]
    gateway: int

    def __post_init__(self):
        if self.value_by_node.get(self.gateway) != 0.0:
            raise ValueError("gateway potential must be 0")


def force(fld: PotentialField, v: int, w: int) -> float:
    return fld.value_by_node[v] - fld.value_by_node[w]


def next_hop_select(fld: PotentialField, v: int, candidates: Iterable[int]) -> int:
    """Neighbor with the least remaining delay to the gateway; ties to lowest id."""
    pool = [w for w in candidates if w in fld.value_by_node
            and not math.isinf(fld.value_by_node[w])]
    if not pool:
        raise NoRouteError(f"node {v} has no routable neighbor")
    return min(pool, key=lambda w: (fld.value_by_node[w], w))


def converge_potentials(adjacency: Dict[int, Iterable[int]], link_rtt,
                        gateway: int) -> PotentialField:
    """Iterate the neighbor-minimum rule to a fixed point (synchronous sweeps).

    link_rtt(v, w) is the measured per-link average in ms and must be
    nonnegative.  The fixed point equals single-source shortest path costs.
    """
    nodes = sorted(adjacency)
    values = {v: math.inf for v in nodes}
    values[gateway] = 0.0
    for _ in range(len(nodes) + 1):
        changed = False
        for v in nodes:
            if v == gateway:
                continue
            best = math.inf
            for w in sorted(adjacency[v]):
                cost = link_rtt(v, w)
                if cost < 0:
                    raise SimulationFault(f"negative link cost on {v}-{w}")
                best = min(best, cost + values[w])
            if best != values[v]:
                values[v] = best
                changed = True
        if not changed:
            break
    return PotentialField(value_by_node=values, gateway=gateway)


def aodv_discover(adjacency: Dict[int, Iterable[int]], src: int, dst: int,
                  metric: RouteMetric, link_cost=None) -> List[int]:
    """Resolve one route on the control plane's connectivity graph.

    A request flood with duplicate suppression, uniform per-hop control
    latency, and lowest-id tie-breaks settles on exactly the least-cost
    path, so the flood is computed in closed form here: unit costs for the
    hop-count metric, measured link RTTs otherwise.
    """
    if src == dst:
        raise ValueError("source equals destination")
    if src not in adjacency or dst not in adjacency:
        raise NoRouteError(f"unknown endpoint {src!r} or {dst!r}")
    if metric is RouteMetric.HOP_COUNT:
        cost_fn = lambda u, v: 1.0
    else:
        if link_cost is None:
            raise ValueError("RTT metric needs link costs")
        cost_fn = link_cost

    dist = {src: 0.0}
    parent = {}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, math.inf):
            continue
        if u == dst:
            break
        for v in sorted(adjacency[u]):
            c = cost_fn(u, v)
            if c < 0 or math.isinf(c):
                continue
            nd = d + c
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    if dst not in dist:
        raise NoRouteError(f"no path {src} -> {dst}")
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def path_cost(path: List[int], link_cost) -> float:
    return sum(link_cost(u, v) for u, v in zip(path, path[1:]))


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    rtt_cost: float
    seq_no: int
    expires_at: float

    def __post_init__(self):
        if self.hop_count < 1:
            raise ValueError("hop_count must be >= 1")
        if self.rtt_cost < 0:
            raise ValueError("rtt_cost must be >= 0")


class RouteTable:
    """Per-node forwarding state; one live entry per destination."""

    def __init__(self):
        self._entries: Dict[int, RouteEntry] = {}

    def install(self, entry: RouteEntry):
        self._entries[entry.destination] = entry

    def lookup(self, destination: int, now: float) -> Optional[RouteEntry]:
        entry = self._entries.get(destination)
        if entry is None:
            return None
        if now >= entry.expires_at:
            del self._entries[destination]
            return None
        return entry

    def refresh(self, destination: int, now: float, lifetime: float = ROUTE_LIFETIME):
        entry = self._entries.get(destination)
        if entry is not None and now < entry.expires_at:
            entry.expires_at = now + lifetime

    def invalidate_via(self, neighbor: int) -> List[int]:
        gone = [dst for dst, e in self._entries.items() if e.next_hop == neighbor]
        for dst in gone:
            del self._entries[dst]
        return sorted(gone)

    def rows(self) -> List[RouteEntry]:
        return [self._entries[d] for d in sorted(self._entries)]
