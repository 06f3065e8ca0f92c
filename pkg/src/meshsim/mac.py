"""Per-radio MAC primitives: modified RTS/CTS admission, FIFO queue with
delay instrumentation, and binary exponential backoff.

The RTS/CTS decision functions are pure; the receiver consults them with the
channels its *other* radios are actively using.  Two rule sets exist for each
traffic class: ``literal`` reproduces the published pseudocode equality tests
verbatim (including their asymmetries), ``symmetric`` applies the equivalent
separation thresholds in both directions and is the default.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .channel import separation, validate_channel

# 802.11b DCF timing; the spectrum model fixes behaviour, these fix the clock.
SLOT_TIME = 20e-6
SIFS = 10e-6
DIFS = 50e-6
CW_MIN = 31
CW_MAX = 1023
RETRY_LIMIT = 7

RTS_BYTES = 20
CTS_BYTES = 14
MAC_ACK_BYTES = 14

DEFAULT_QUEUE_CAPACITY = 50


class SimulationFault(RuntimeError):
    """Internal invariant violation; aborts the run rather than degrade."""


class FrameKind(enum.Enum):
    RTS = "RTS"
    CTS = "CTS"
    DATA = "DATA"
    ACK = "ACK"
    HELLO = "HELLO"
    RREQ = "RREQ"
    RREP = "RREP"


@dataclass
class Frame:
    kind: FrameKind
    src: int
    dst: int
    channel: int
    size_bytes: int
    flow_id: int = -1
    seq: int = -1
    uid: int = -1          # engine-unique id, used for duplicate suppression
    born: float = 0.0      # first-injection time of the end-to-end packet
    payload: object = None


class RtsDecision(enum.Enum):
    SEND_CTS = "SendCts"
    DEFER = "Defer"


def _literal_match(c1: int, local: int, offset: int) -> bool:
    # Pseudocode branches: channels 1-6 test c1 == local+offset, channels
    # 7-11 test c1 == (local+offset) mod 11.  For offset 4 the local=7 branch
    # yields 0, which no channel equals; that dead branch is kept as written.
    if local <= 6:
        return c1 == local + offset
    return c1 == (local + offset) % 11


def _decide(c1, local_channels, mode, offset, min_separation):
    validate_channel(c1)
    for local in local_channels:
        validate_channel(local)
        if c1 == local:
            return RtsDecision.DEFER
        if mode == "literal":
            if not _literal_match(c1, local, offset):
                return RtsDecision.DEFER
        elif mode == "symmetric":
            if separation(c1, local) < min_separation:
                return RtsDecision.DEFER
        else:
            raise ValueError(f"unknown rts mode {mode!r}")
    return RtsDecision.SEND_CTS


def handle_rts_qos(c1: int, local_channels: Iterable[int], mode: str = "symmetric") -> RtsDecision:
    """Admission test for QoS traffic: every local channel must be orthogonal.

    An empty ``local_channels`` means the receiver has no conflicting
    activity, which admits the transmission.
    """
    return _decide(c1, local_channels, mode, offset=5, min_separation=5)


def handle_rts_delay_tolerant(c1: int, local_channels: Iterable[int], mode: str = "symmetric") -> RtsDecision:
    """Admission test for delay-tolerant traffic: separation 4 is also allowed."""
    return _decide(c1, local_channels, mode, offset=4, min_separation=4)


def rts_handler(traffic_class: str):
    if traffic_class == "qos":
        return handle_rts_qos
    if traffic_class == "delay_tolerant":
        return handle_rts_delay_tolerant
    raise ValueError(f"unknown traffic class {traffic_class!r}")


@dataclass
class QueueTimestamps:
    """Arrival, head-of-queue, and handed-to-medium instants for one frame."""

    t_i: float
    t_h: Optional[float] = None
    t_next: Optional[float] = None

    def mark_head(self, now: float):
        if now < self.t_i:
            raise SimulationFault(f"head time {now} precedes arrival {self.t_i}")
        if self.t_h is None:
            self.t_h = now

    def mark_released(self, now: float):
        if self.t_h is None:
            raise SimulationFault("frame released to medium before reaching queue head")
        if now < self.t_h:
            raise SimulationFault(f"release time {now} precedes head time {self.t_h}")
        self.t_next = now


def hop_delay(ts: QueueTimestamps, size_bytes: int, rate_bps: float):
    """Split one hop's delay into queue, contention, and transmission parts."""
    if rate_bps <= 0:
        raise ValueError("rate_bps must be positive")
    if ts.t_h is None or ts.t_next is None:
        raise SimulationFault("hop_delay requires fully stamped timestamps")
    queue_delay = ts.t_h - ts.t_i
    contention_delay = ts.t_next - ts.t_h
    transmission_delay = size_bytes * 8 / rate_bps
    return (queue_delay, contention_delay, transmission_delay,
            queue_delay + contention_delay + transmission_delay)


def weighted_hop_cost(ts: QueueTimestamps, alpha: float) -> float:
    """Blend of queue and contention delay; alpha=0 is queue-only, 1 contention-only."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    return (1.0 - alpha) * (ts.t_h - ts.t_i) + alpha * (ts.t_next - ts.t_h)


class BackoffOutcome(enum.Enum):
    BUSY = "Busy"
    DEFERRED = "Deferred"
    SUCCESS = "Success"


@dataclass
class BackoffState:
    cw: int = CW_MIN
    retries: int = 0
    slot_time: float = SLOT_TIME
    cw_min: int = CW_MIN
    cw_max: int = CW_MAX

    def next(self, outcome: BackoffOutcome, rng) -> int:
        """Advance state for one access outcome; returns the slots to wait."""
        if outcome is BackoffOutcome.SUCCESS:
            self.cw = self.cw_min
            self.retries = 0
            return 0
        wait = rng.randint(0, self.cw)
        self.cw = min(2 * self.cw + 1, self.cw_max)
        self.retries += 1
        return wait


class EnqueueResult(enum.Enum):
    ACCEPTED = "Accepted"
    DROPPED_QUEUE_FULL = "DroppedQueueFull"


class QueuedFrame:
    __slots__ = ("frame", "ts")

    def __init__(self, frame: Frame, ts: QueueTimestamps):
        self.frame = frame
        self.ts = ts


class MacRadioState:
    """One radio: a channel, a bounded FIFO, and its backoff state."""

    def __init__(self, channel: int, capacity: int = DEFAULT_QUEUE_CAPACITY,
                 backoff: Optional[BackoffState] = None):
        validate_channel(channel)
        self.channel = channel
        self.capacity = capacity
        self.queue = deque()
        self.backoff = backoff or BackoffState()
        self.drops_queue_full = 0
        self._last_time = 0.0

    def _check_clock(self, now: float):
        if now < self._last_time:
            raise SimulationFault(f"radio clock moved backwards: {now} < {self._last_time}")
        self._last_time = now

    def enqueue(self, frame: Frame, now: float) -> EnqueueResult:
        self._check_clock(now)
        if len(self.queue) >= self.capacity:
            self.drops_queue_full += 1
            return EnqueueResult.DROPPED_QUEUE_FULL
        ts = QueueTimestamps(t_i=now)
        if not self.queue:
            ts.mark_head(now)
        self.queue.append(QueuedFrame(frame, ts))
        return EnqueueResult.ACCEPTED

    def head(self) -> Optional[QueuedFrame]:
        return self.queue[0] if self.queue else None

    def release_head_to_medium(self, now: float):
        self._check_clock(now)
        entry = self.queue[0]
        entry.ts.mark_released(now)
        return entry.ts

    def pop_head(self, now: float) -> QueuedFrame:
        self._check_clock(now)
        entry = self.queue.popleft()
        if self.queue:
            self.queue[0].ts.mark_head(now)
        return entry

    def __len__(self):
        return len(self.queue)
