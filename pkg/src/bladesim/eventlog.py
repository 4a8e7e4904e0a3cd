"""Run record from which every metric is derived."""
from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class EventLog:
    n: int
    mar_window_us: int = 1_000_000
    record_emissions: bool = True
    ppdus: list = field(default_factory=list)
    emissions: list = field(default_factory=list)
    cw_trace: list = field(default_factory=list)
    mar_samples: list = field(default_factory=list)
    backlogs: list = field(default_factory=list)
    frames: dict = field(default_factory=dict)
    airtime: list = field(default_factory=list)
    flows: list = field(default_factory=list)
    names: list = field(default_factory=list)
    end_time: int = 0
    warmup: int = 0
    _exchanges: int = 0

    def __post_init__(self):
        # per station: {window: [tx events, idle slots]}
        self.channel = [dict() for _ in range(self.n)]

    def new_exchange(self) -> int:
        self._exchanges += 1
        return self._exchanges

    def channel_count(self, station: int, t: int, tx: int, idle: int) -> None:
        w = t // self.mar_window_us
        c = self.channel[station].get(w)
        if c is None:
            self.channel[station][w] = [tx, idle]
        else:
            c[0] += tx
            c[1] += idle

    def emission(self, e) -> None:
        if self.record_emissions:
            self.emissions.append((e.start, e.end, e.link, e.kind.value, e.exchange))

    def cw(self, t: int, station: int, cw: float, kind: str) -> None:
        self.cw_trace.append((t, station, cw, kind))

    def mar(self, t: int, station: int, mar: float) -> None:
        self.mar_samples.append((t, station, mar))

    def ppdu_done(self, p) -> None:
        self.ppdus.append(p)

    def backlog(self, station: int, start: int, end: int) -> None:
        self.backlogs.append((station, start, end))

    def frame_generated(self, station: int, key: int, t: int, n_packets: int, size: int) -> None:
        self.frames[(station, key)] = [t, n_packets, 0, None, size]

    def packets_delivered(self, station: int, packets, t: int) -> None:
        for pkt in packets:
            key = pkt[2]
            if key is None:
                continue
            f = self.frames.get((station, key))
            if f is None:
                continue
            f[2] += 1
            if f[2] == f[1]:
                f[3] = t

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "end_time": self.end_time,
            "warmup": self.warmup,
            "ppdus": [
                [p.transmitter, p.id, p.size, p.enqueue_time, p.fes_start, p.fes_end, p.dropped,
                 [[a.t_tx, a.phy, a.ref, a.backoff, round(a.cw, 9), a.gt_contention, a.outcome]
                  for a in p.attempts]]
                for p in self.ppdus
            ],
            "emissions": self.emissions,
            "cw": [[t, s, round(c, 9), k] for t, s, c, k in self.cw_trace],
            "mar": [[t, s, round(m, 12)] for t, s, m in self.mar_samples],
            "channel": [sorted(c.items()) for c in self.channel],
            "backlogs": self.backlogs,
            "frames": sorted([list(k) + v for k, v in self.frames.items()], key=lambda r: (r[0], r[1])),
            "airtime": self.airtime,
            "flows": self.flows,
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
