"""Deterministic discrete-event core.

Integer-microsecond clock, a heap-backed event queue with a fixed tie-break
(time, kind rank, station id, insertion order) and the shared medium, which
tracks every on-air emission and what each transmitter hears under the
carrier-sense graph.
"""
from __future__ import annotations

import bisect
import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Sequence

SimTime = int


class ContractViolation(RuntimeError):
    """A precondition of the engine was broken; the run is aborted."""


class EventKind(IntEnum):
    # value is the tie-break rank for events at equal time
    TX_END = 0
    NAV_END = 1
    ACK_DUE = 2
    CTS_START = 3
    DATA_START = 4
    ACK_TIMEOUT = 5
    ARRIVAL_DUE = 6
    SLOT_TICK = 7
    TX_START = 8


class ChannelState(Enum):
    IDLE = "IDLE"
    BUSY = "BUSY"


class FrameKind(str, Enum):
    DATA = "DATA"
    RTS = "RTS"
    CTS = "CTS"
    ACK = "ACK"


@dataclass(order=False)
class Event:
    time: SimTime
    kind: EventKind
    subject: int
    payload: Any = None
    token: int | None = None


class EventQueue:
    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self.now: SimTime = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, event: Event) -> Event:
        if event.time < self.now:
            raise ContractViolation(
                f"event {event.kind.name} for station {event.subject} at t={event.time} "
                f"is before the clock ({self.now})")
        heapq.heappush(self._heap, (event.time, int(event.kind), event.subject, next(self._seq), event))
        return event

    def peek_time(self) -> SimTime | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        ev = heapq.heappop(self._heap)[4]
        self.now = ev.time
        return ev


@dataclass
class Topology:
    """Carrier-sense graph between transmitters plus receiver audibility.

    ``sense[i][j]``: transmitter ``i`` detects transmitter ``j``.
    ``rx_hears[k][j]``: the receiver of link ``k`` hears transmitter ``j`` (so
    ``j``'s data/RTS interferes there) and, symmetrically, ``j`` hears that
    receiver's CTS/ACK. Defaults to ``sense`` (receiver co-located with its
    transmitter).
    """

    sense: list[list[bool]]
    rx_hears: list[list[bool]] | None = None
    names: list[str] | None = None

    def __post_init__(self):
        n = len(self.sense)
        self.sense = [[bool(x) for x in row] for row in self.sense]
        if self.rx_hears is None:
            self.rx_hears = [row[:] for row in self.sense]
        else:
            self.rx_hears = [[bool(x) for x in row] for row in self.rx_hears]
        if self.names is None:
            self.names = [f"sta{i}" for i in range(n)]
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def n(self) -> int:
        return len(self.sense)

    @property
    def stations(self) -> list[int]:
        return list(range(self.n))

    def link(self, i: int) -> int:
        """Receiver id of transmitter ``i`` (receivers are numbered after transmitters)."""
        return self.n + i

    def validate(self) -> list[str]:
        n = len(self.sense)
        errs = []
        if n == 0:
            errs.append("topology has no stations")
        for name, m in (("sense", self.sense), ("rx_hears", self.rx_hears)):
            if len(m) != n or any(len(row) != n for row in m):
                errs.append(f"{name} matrix must be {n}x{n}")
                return errs
        for i in range(n):
            if not self.sense[i][i]:
                errs.append(f"sense[{i}][{i}] must be true")
            if not self.rx_hears[i][i]:
                errs.append(f"rx_hears[{i}][{i}] must be true")
            for j in range(i + 1, n):
                if self.sense[i][j] != self.sense[j][i]:
                    errs.append(f"sense matrix not symmetric at ({i},{j})")
        return errs

    @classmethod
    def fully_connected(cls, n: int) -> "Topology":
        return cls([[True] * n for _ in range(n)])

    @classmethod
    def three_rooms(cls, per_room: int = 1) -> "Topology":
        """Rooms in a row: end rooms cannot sense each other, the middle senses both.

        End-room receivers sit within range of the far end, so end
        transmitters are hidden from each other at the receivers.
        """
        rooms = [r for r in range(3) for _ in range(per_room)]
        n = len(rooms)
        sense = [[abs(rooms[i] - rooms[j]) <= 1 for j in range(n)] for i in range(n)]
        rx = [[True] * n for _ in range(n)]
        names = [f"{'ABC'[rooms[i]]}{i % per_room}" for i in range(n)]
        return cls(sense, rx, names)


@dataclass
class Emission:
    id: int
    link: int            # link (transmitter index) the frame belongs to
    from_receiver: bool  # CTS/ACK are sent by the link's receiver
    kind: FrameKind
    start: SimTime
    end: SimTime
    exchange: int
    corrupted: bool = False


class Medium:
    """Shared channel: active emissions and per-transmitter busy/idle view.

    Stations are notified through ``on_medium_busy(t, emission)``,
    ``on_medium_idle(t)`` and ``on_overlap(emission)`` (a new emission heard
    while already busy).
    """

    def __init__(self, topology: Topology, queue: EventQueue):
        self.topology = topology
        self.queue = queue
        n = topology.n
        self.n = n
        self.hear_tx = [[i for i in range(n) if topology.sense[i][j]] for j in range(n)]
        self.hear_rx = [[i for i in range(n) if topology.rx_hears[k][i]] for k in range(n)]
        self.busy_count = [0] * n
        self.nav_until = [0] * n
        self.idle_since = [0] * n
        self.tx_count = [0] * n
        self.active: dict[int, Emission] = {}
        self.history: list[Emission] = []
        self._starts: list[SimTime] = []
        self._max_dur = 0
        self._ids = itertools.count()
        self.listeners: Sequence[Any] = []
        # airtime accounting: state 0 idle, 1 busy (others), 2 own tx
        self._acct_state = [0] * n
        self._acct_since = [0] * n
        self.airtime = [[0, 0, 0] for _ in range(n)]

    # views -------------------------------------------------------------

    def is_busy(self, i: int, t: SimTime | None = None) -> bool:
        t = self.queue.now if t is None else t
        return self.busy_count[i] > 0 or self.nav_until[i] > t

    def channel_state(self, i: int, t: SimTime | None = None) -> ChannelState:
        """Physical carrier sense of station ``i`` at ``t <= now`` (NAV not included)."""
        now = self.queue.now
        t = now if t is None else t
        if t > now:
            raise ContractViolation("channel_state queried in the future")
        hist = self.history
        k = bisect.bisect_right(self._starts, t)
        while k > 0:
            k -= 1
            e = hist[k]
            if e.start < t - self._max_dur:
                break
            if e.start <= t < e.end and self._audible(i, e):
                return ChannelState.BUSY
        return ChannelState.IDLE

    def audience(self, e: Emission) -> list[int]:
        return self.hear_rx[e.link] if e.from_receiver else self.hear_tx[e.link]

    def _audible(self, i: int, e: Emission) -> bool:
        if e.from_receiver:
            return self.topology.rx_hears[e.link][i]
        return self.topology.sense[i][e.link]

    # accounting --------------------------------------------------------

    def _acct(self, i: int, t: SimTime) -> None:
        st = self._acct_state[i]
        self.airtime[i][st] += t - self._acct_since[i]
        self._acct_since[i] = t
        if self.tx_count[i] > 0:
            self._acct_state[i] = 2
        elif self.busy_count[i] > 0 or self.nav_until[i] > t:
            self._acct_state[i] = 1
        else:
            self._acct_state[i] = 0

    def close_accounting(self, t: SimTime) -> list[list[int]]:
        for i in range(self.n):
            self._acct(i, t)
        return self.airtime

    # emissions ---------------------------------------------------------

    def start_emission(self, link: int, kind: FrameKind, duration: int, exchange: int) -> Emission:
        t = self.queue.now
        from_rx = kind in (FrameKind.CTS, FrameKind.ACK)
        e = Emission(next(self._ids), link, from_rx, kind, t, t + duration, exchange)
        rx = self.topology.rx_hears
        if not from_rx:
            for a in self.active.values():
                if a.from_receiver or a.link == link:
                    continue
                # no capture: any overlap audible at a receiver destroys both frames
                if rx[a.link][link]:
                    a.corrupted = True
                if rx[link][a.link]:
                    e.corrupted = True
            self._acct(link, t)
            self.tx_count[link] += 1
            self._acct(link, t)
        self.active[e.id] = e
        self.history.append(e)
        self._starts.append(t)
        if duration > self._max_dur:
            self._max_dur = duration
        listeners = self.listeners
        for i in self.audience(e):
            was_busy = self.busy_count[i] > 0 or self.nav_until[i] > t
            self._acct(i, t)
            self.busy_count[i] += 1
            self._acct(i, t)
            if was_busy:
                listeners[i].on_overlap(e)
            else:
                listeners[i].on_medium_busy(t, e)
        return e

    def end_emission(self, e: Emission) -> None:
        t = self.queue.now
        del self.active[e.id]
        if not e.from_receiver:
            self._acct(e.link, t)
            self.tx_count[e.link] -= 1
        nav = None
        if e.kind is FrameKind.RTS and not e.corrupted:
            nav = ("rts", self.listeners[e.link].nav_after_rts(t))
        elif e.kind is FrameKind.CTS:
            nav = ("cts", self.listeners[e.link].nav_after_cts(t))
        audience = self.audience(e)
        if nav is not None:
            for i in audience:
                if i != e.link and self.tx_count[i] == 0:
                    self._set_nav(i, nav[1])
        for i in audience:
            self._acct(i, t)
            self.busy_count[i] -= 1
            self._acct(i, t)
            if self.busy_count[i] == 0 and self.nav_until[i] <= t:
                self.idle_since[i] = t
                self.listeners[i].on_medium_idle(t)
        if not e.from_receiver:
            self._acct(e.link, t)

    def _set_nav(self, i: int, until: SimTime) -> None:
        if until > self.nav_until[i]:
            self.nav_until[i] = until
            self.queue.schedule(Event(until, EventKind.NAV_END, i))

    def on_nav_end(self, i: int) -> None:
        t = self.queue.now
        if self.nav_until[i] == t and self.busy_count[i] == 0:
            self._acct(i, t)
            self.idle_since[i] = t
            self.listeners[i].on_medium_idle(t)


def run_until(end: SimTime, scenario, seed: int | None = None, variant: str | None = None):
    """Build the scenario's simulation for ``seed`` and run it to ``end`` µs; returns the EventLog."""
    from .scenario import build_simulation

    sim = build_simulation(scenario, seed=seed, variant=variant)
    return sim.run_until(end)
