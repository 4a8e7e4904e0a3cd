"""Per-station CSMA/CA state machine.

Backoff countdown is event driven rather than ticked: once the medium has
been idle for DIFS the station schedules its transmission ``backoff`` slots
ahead on the shared slot grid (all stations that saw the same idle edge use
the same grid). A busy edge before that instant cancels the transmission and
keeps only the fully elapsed slots. A station whose countdown expires at the
very instant another transmission begins is already committed and transmits
too, so equal draws collide.

Contention intervals follow the timestamp reconstruction:

* first attempt of a PPDU: ``T_tx - fes_start - DIFS``
* after a success: ``T_tx - T_ack_end - DIFS`` (identical for saturated queues)
* after a failure: ``T_tx - T_tx_prev - PHY_prev - SIFS - DIFS``

so that ``FES = sum(c_k + DIFS) + sum(PHY_k) + n*SIFS + ACK``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .engine import ChannelState, ContractViolation, Event, EventKind, FrameKind


@dataclass(frozen=True)
class PhyParams:
    slot: int = 9
    sifs: int = 16
    difs: int = 34
    ack_duration: int = 44
    cts_duration: int = 44
    rts_duration: int = 52
    preamble: int = 40
    data_rate: float = 300.0     # bits per microsecond
    ppdu_size: int = 800_000     # bits per aggregated PPDU
    rts_cts: bool = False
    retry_limit: int = 7

    def __post_init__(self):
        if not self.difs > self.sifs > 0:
            raise ValueError("need difs > sifs > 0")
        if self.slot <= 0:
            raise ValueError("slot must be > 0")
        if self.data_rate <= 0 or self.ppdu_size <= 0:
            raise ValueError("data_rate and ppdu_size must be > 0")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")

    def data_duration(self, bits: int | None = None) -> int:
        bits = self.ppdu_size if bits is None else bits
        return self.preamble + math.ceil(bits / self.data_rate)

    @property
    def eta(self) -> float:
        """Collision cost in slots: a lost data attempt plus the wait for its ACK."""
        return (self.data_duration() + self.sifs + self.ack_duration + self.slot + self.difs) / self.slot


class Phase(Enum):
    IDLE_QUEUE_EMPTY = "IdleQueueEmpty"
    DIFS = "Difs"
    BACKOFF = "Backoff"
    FROZEN = "Frozen"
    TRANSMITTING = "Transmitting"
    AWAIT_ACK = "AwaitAck"


@dataclass
class Attempt:
    t_tx: int
    phy: int            # on-air duration of the attempt (RTS..DATA for a full exchange)
    ref: int            # reference instant of the contention interval
    backoff: int        # slots drawn
    cw: float
    gt_contention: int  # simulator-side: drawn slots + deferred time
    outcome: str = ""   # "ok" | "fail"


@dataclass
class Ppdu:
    id: int
    transmitter: int
    receiver: int
    size: int
    enqueue_time: int
    fes_start: int
    packets: list = field(default_factory=list)
    attempts: list = field(default_factory=list)
    fes_end: int | None = None
    dropped: bool = False

    @property
    def attempt_count(self) -> int:
        return len(self.attempts)


def contention_interval(ppdu: Ppdu, attempt: int, phy: PhyParams) -> int:
    """Contention interval of ``attempt`` rebuilt from FES timestamps only."""
    if not 0 <= attempt < len(ppdu.attempts):
        raise IndexError(f"attempt {attempt} out of range for PPDU with {len(ppdu.attempts)} attempts")
    a = ppdu.attempts[attempt]
    if attempt == 0:
        return a.t_tx - ppdu.fes_start - phy.difs
    prev = ppdu.attempts[attempt - 1]
    return a.t_tx - prev.t_tx - prev.phy - phy.sifs - phy.difs


class Station:
    """One transmitter with its receiver; listens to the medium through callbacks."""

    def __init__(self, sid: int, phy: PhyParams, policy, medium, queue, rng, log, source=None,
                 receiver: int | None = None):
        self.id = sid
        self.phy = phy
        self.policy = policy
        self.medium = medium
        self.queue = queue
        self.rng = rng
        self.log = log
        self.source = source
        self.receiver = medium.n + sid if receiver is None else receiver
        self.phase = Phase.IDLE_QUEUE_EMPTY
        self.backoff = 0
        self.drawn = 0
        self.cs = 0          # countdown start on the slot grid
        self.tx_at = 0
        self.token = 0
        self.ready_at = 0
        self.ref = 0
        self.excess = 0
        self.seg_start = 0
        self.deferred = 0
        self.slots_counted = 0
        self.hol: Ppdu | None = None
        self.exchange = -1
        self.packets: deque = deque()
        self.heard_recent: set = set()
        self._ppdu_ids = 0
        self.backlog_since: int | None = None
        self.delivered_bits = 0

    # contention --------------------------------------------------------

    def begin_contention(self) -> int:
        """Draw a backoff uniformly from ``0..floor(cw)``."""
        cw = self.policy.current_cw()
        self.drawn = self.rng.randint(0, max(int(math.floor(cw)), 0))
        self.backoff = self.drawn
        self.slots_counted = 0
        return self.drawn

    def _ready(self, t: int, ref: int) -> None:
        self.ready_at = t
        self.ref = ref
        self.excess = t - ref
        self.seg_start = t
        self.deferred = 0
        self.begin_contention()
        self._try_countdown(t)

    def _try_countdown(self, t: int) -> None:
        m = self.medium
        if m.is_busy(self.id, t):
            self.phase = Phase.FROZEN
            return
        slot, difs = self.phy.slot, self.phy.difs
        base = m.idle_since[self.id] + difs
        earliest = self.ready_at + difs
        if base < earliest:
            base += -(-(earliest - base) // slot) * slot
        self.cs = base
        self.tx_at = base + self.backoff * slot
        self.token += 1
        self.phase = Phase.BACKOFF
        self.queue.schedule(Event(self.tx_at, EventKind.TX_START, self.id, token=self.token))

    def on_busy_detected(self, t: int) -> None:
        if self.phase is not Phase.BACKOFF or t == self.tx_at:
            return
        if t > self.tx_at:
            raise ContractViolation("freeze after countdown expiry")
        consumed = (t - self.cs) // self.phy.slot if t > self.cs else 0
        self.backoff -= consumed
        self.slots_counted += consumed
        self.deferred += (t - self.seg_start) - consumed * self.phy.slot
        self.seg_start = t
        self.token += 1
        self.phase = Phase.FROZEN

    # medium callbacks --------------------------------------------------

    def on_medium_busy(self, t: int, e) -> None:
        gap = t - self.medium.idle_since[self.id]
        idle = 0
        if gap >= self.phy.difs:
            idle = (gap - self.phy.difs) // self.phy.slot
            self.heard_recent.clear()
        w = 0
        if e.exchange not in self.heard_recent:
            w = 2 if e.kind is FrameKind.CTS else 1
            self.heard_recent.add(e.exchange)
        self.log.channel_count(self.id, t, w, idle)
        if idle:
            self.policy.observe(ChannelState.IDLE, idle)
        if w:
            self.policy.observe(ChannelState.BUSY, w)
        self.on_busy_detected(t)

    def on_overlap(self, e) -> None:
        self.heard_recent.add(e.exchange)

    def on_medium_idle(self, t: int) -> None:
        if self.phase is Phase.FROZEN:
            self._try_countdown(t)

    def nav_after_rts(self, t: int) -> int:
        p = self.phy
        return t + p.sifs + p.cts_duration + p.sifs

    def nav_after_cts(self, t: int) -> int:
        p = self.phy
        return t + p.sifs + p.data_duration(self.hol.size) + p.sifs + p.ack_duration

    # frame exchange ----------------------------------------------------

    def on_tx_start(self, token: int) -> None:
        if token != self.token or self.phase is not Phase.BACKOFF:
            return
        t = self.queue.now
        p = self.phy
        self.slots_counted += self.backoff
        if self.slots_counted != self.drawn:
            raise ContractViolation(f"station {self.id}: counted {self.slots_counted} slots, drew {self.drawn}")
        self.deferred += (t - self.seg_start) - self.backoff * p.slot
        self.backoff = 0
        gt = self.excess + self.drawn * p.slot + self.deferred - p.difs
        self.exchange = self.log.new_exchange()
        data = p.data_duration(self.hol.size)
        phy = p.rts_duration if p.rts_cts else data
        self.hol.attempts.append(Attempt(t, phy, self.ref, self.drawn, self.policy.current_cw(), gt))
        self.phase = Phase.TRANSMITTING
        kind = FrameKind.RTS if p.rts_cts else FrameKind.DATA
        self._emit(kind, phy)

    def _emit(self, kind: FrameKind, duration: int) -> None:
        e = self.medium.start_emission(self.id, kind, duration, self.exchange)
        self.log.emission(e)
        self.queue.schedule(Event(e.end, EventKind.TX_END, self.id, payload=e))

    def on_emission_end(self, e) -> None:
        t = self.queue.now
        p = self.phy
        if e.kind is FrameKind.DATA:
            self.phase = Phase.AWAIT_ACK
            if e.corrupted:
                self._timeout(t + p.sifs + p.ack_duration + p.slot)
            else:
                self.queue.schedule(Event(t + p.sifs, EventKind.ACK_DUE, self.id))
        elif e.kind is FrameKind.RTS:
            self.phase = Phase.AWAIT_ACK
            if e.corrupted:
                self._timeout(t + p.sifs + p.cts_duration + p.slot)
            else:
                self.queue.schedule(Event(t + p.sifs, EventKind.CTS_START, self.id))
        elif e.kind is FrameKind.CTS:
            self.queue.schedule(Event(t + p.sifs, EventKind.DATA_START, self.id))
        elif e.kind is FrameKind.ACK:
            self.complete_fes(True)

    def _timeout(self, at: int) -> None:
        self.queue.schedule(Event(at, EventKind.ACK_TIMEOUT, self.id, token=self.exchange))

    def on_response_due(self, kind: EventKind) -> None:
        p = self.phy
        if kind is EventKind.CTS_START:
            self._emit(FrameKind.CTS, p.cts_duration)
        elif kind is EventKind.DATA_START:
            self.phase = Phase.TRANSMITTING
            a = self.hol.attempts[-1]
            data = p.data_duration(self.hol.size)
            # a full RTS exchange occupies the medium from RTS start to DATA end
            a.phy = self.queue.now + data - a.t_tx
            self._emit(FrameKind.DATA, data)
        elif kind is EventKind.ACK_DUE:
            self._emit(FrameKind.ACK, p.ack_duration)

    def on_ack_timeout(self, token: int) -> None:
        if token == self.exchange and self.phase is Phase.AWAIT_ACK:
            self.complete_fes(False)

    def complete_fes(self, success: bool) -> None:
        t = self.queue.now
        ppdu = self.hol
        a = ppdu.attempts[-1]
        a.outcome = "ok" if success else "fail"
        pol = self.policy
        if success:
            ppdu.fes_end = t
            self.delivered_bits += ppdu.size
            self.log.packets_delivered(self.id, ppdu.packets, t)
            before = getattr(pol, "updates", None)
            pol.on_ack(sum(x.gt_contention for x in ppdu.attempts))
            if before is not None and pol.updates != before:
                self.log.mar(t, self.id, pol.mar_sample())
            self.log.cw(t, self.id, pol.current_cw(), "ack")
            self.log.ppdu_done(ppdu)
            self.hol = None
            self._next_ppdu(t)
            return
        pol.on_failure()
        self.log.cw(t, self.id, pol.current_cw(), "fail")
        if len(ppdu.attempts) > self.phy.retry_limit:
            pol.on_drop()
            ppdu.dropped = True
            ppdu.fes_end = t
            self.log.ppdu_done(ppdu)
            self.hol = None
            self._next_ppdu(t)
            return
        self._ready(t, a.t_tx + a.phy + self.phy.sifs)

    # queue -------------------------------------------------------------

    def on_arrival(self, packets) -> None:
        t = self.queue.now
        for pkt in packets:
            self.packets.append(pkt)
        if self.phase is Phase.IDLE_QUEUE_EMPTY and self.hol is None:
            self._next_ppdu(t)

    def _next_ppdu(self, t: int) -> None:
        size, pkts, enq = self._take(t)
        if size == 0:
            self.phase = Phase.IDLE_QUEUE_EMPTY
            if self.backlog_since is not None:
                self.log.backlog(self.id, self.backlog_since, t)
                self.backlog_since = None
            return
        if self.backlog_since is None:
            self.backlog_since = t
        self._ppdu_ids += 1
        self.hol = Ppdu(self._ppdu_ids, self.id, self.receiver, size, enq, t, pkts)
        self._ready(t, t)

    def _take(self, t: int):
        src = self.source
        cap = self.phy.ppdu_size
        if src is not None and src.saturated:
            if src.backlogged(t):
                return cap, [], t
            return 0, [], t
        size = 0
        pkts = []
        q = self.packets
        while q and (not pkts or size + q[0][1] <= cap):
            pkt = q.popleft()
            pkts.append(pkt)
            size += pkt[1]
        return size, pkts, (pkts[0][0] if pkts else t)

    def close(self, t: int) -> None:
        if self.backlog_since is not None:
            self.log.backlog(self.id, self.backlog_since, t)
            self.backlog_since = None
