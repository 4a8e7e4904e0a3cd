"""Packet arrival generators.

A packet is the tuple ``(arrival_time_us, size_bits, frame_key)``;
``frame_key`` is ``None`` unless the packet belongs to a video frame.
``next_arrival(now)`` returns ``(time, packets)`` or ``None`` when the source
is exhausted.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path


class TraceParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int
    size: int
    direction: str = "down"


class SaturatedSource:
    """Always backlogged between ``start`` and ``stop`` (µs)."""

    saturated = True

    def __init__(self, start: int = 0, stop: int | None = None):
        self.start = start
        self.stop = stop
        self._fired = False

    def backlogged(self, t: int) -> bool:
        return t >= self.start and (self.stop is None or t < self.stop)

    def next_arrival(self, now: int):
        # one wake-up at the start; the station refills itself afterwards
        if self._fired:
            return None
        self._fired = True
        return max(self.start, now), []


def parse_trace(lines, direction: str | None = None) -> list[TraceRecord]:
    """Parse ``timestamp_us,size_bytes,direction`` lines; a header row is optional."""
    out = []
    last = None
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
            continue
        if len(row) not in (2, 3):
            raise TraceParseError(lineno, f"expected 2 or 3 fields, got {len(row)}")
        try:
            ts = int(row[0])
            size = int(row[1])
        except ValueError as exc:
            raise TraceParseError(lineno, str(exc)) from None
        d = row[2].strip() if len(row) == 3 else "down"
        if d not in ("down", "up"):
            raise TraceParseError(lineno, f"direction must be down|up, got {d!r}")
        if ts < 0 or size <= 0:
            raise TraceParseError(lineno, "timestamp must be >= 0 and size > 0")
        if last is not None and ts < last:
            raise TraceParseError(lineno, "timestamps must be non-decreasing")
        last = ts
        if direction is None or d == direction:
            out.append(TraceRecord(ts, size, d))
    return out


class TraceSource:
    saturated = False

    def __init__(self, records, offset: int = 0):
        self.records = list(records)
        self.offset = offset
        self._i = 0

    @classmethod
    def from_file(cls, path, direction: str | None = None, offset: int = 0) -> "TraceSource":
        with open(Path(path), newline="") as fh:
            return cls(parse_trace(fh, direction), offset)

    @property
    def total_bytes(self) -> int:
        return sum(r.size for r in self.records)

    def next_arrival(self, now: int):
        recs = self.records
        if self._i >= len(recs):
            return None
        t = recs[self._i].timestamp
        batch = []
        while self._i < len(recs) and recs[self._i].timestamp == t:
            batch.append((t + self.offset, recs[self._i].size * 8, None))
            self._i += 1
        return t + self.offset, batch


class FrameSource:
    """Video frames every ``1/fps`` seconds, each split into MTU-sized packets.

    The default frame size gives about 50 Mbit/s at 60 FPS.
    """

    saturated = False

    def __init__(self, fps: float = 60.0, frame_size: int = 104_167, mtu: int = 1500,
                 start: int = 0, stop: int | None = None, sizes=None, on_frame=None):
        if fps <= 0 or mtu <= 0:
            raise ValueError("fps and mtu must be > 0")
        self.fps = fps
        self.frame_size = frame_size
        self.mtu = mtu
        self.start = start
        self.stop = stop
        self.sizes = sizes      # optional callable k -> frame size in bytes
        self.on_frame = on_frame
        self._k = 0

    def frame_time(self, k: int) -> int:
        return self.start + round(k * 1e6 / self.fps)

    def packetize(self, size: int) -> list[int]:
        n = math.ceil(size / self.mtu)
        return [self.mtu] * (n - 1) + [size - self.mtu * (n - 1)]

    def next_arrival(self, now: int):
        t = self.frame_time(self._k)
        if self.stop is not None and t >= self.stop:
            return None
        size = self.sizes(self._k) if self.sizes else self.frame_size
        parts = self.packetize(size)
        key = self._k
        if self.on_frame is not None:
            self.on_frame(key, t, len(parts), size)
        self._k += 1
        return t, [(t, b * 8, key) for b in parts]


class PeriodicSource:
    """Fixed-size packets at a fixed period, e.g. beacons or a small uplink."""

    saturated = False

    def __init__(self, period_us: int, size: int = 300, start: int = 0, stop: int | None = None):
        if period_us <= 0:
            raise ValueError("period must be > 0")
        self.period = period_us
        self.size = size
        self.start = start
        self.stop = stop
        self._k = 0

    def next_arrival(self, now: int):
        t = self.start + self._k * self.period
        if self.stop is not None and t >= self.stop:
            return None
        self._k += 1
        return t, [(t, self.size * 8, None)]


def make_source(spec: dict, *, base_dir: Path | None = None):
    spec = dict(spec)
    kind = spec.pop("kind", "saturated")
    start = int(round(spec.pop("start_ms", 0) * 1000))
    stop = spec.pop("stop_ms", None)
    stop = None if stop is None else int(round(stop * 1000))
    if kind == "saturated":
        src = SaturatedSource(start, stop)
    elif kind == "frames":
        sizes = spec.pop("frame_sizes", None)
        if sizes is not None:
            sizes = [int(x) for x in sizes]
            if not sizes or min(sizes) <= 0:
                raise ValueError("frame_sizes must be a non-empty list of positive sizes")
        src = FrameSource(spec.pop("fps", 60.0), spec.pop("frame_size", 104_167), spec.pop("mtu", 1500),
                          start, stop, sizes=(lambda k: sizes[k % len(sizes)]) if sizes else None)
    elif kind == "trace":
        path = Path(spec.pop("path"))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        src = TraceSource.from_file(path, spec.pop("direction", None), start)
    elif kind == "periodic":
        src = PeriodicSource(int(spec.pop("period_ms", 102.4) * 1000), spec.pop("size", 300), start, stop)
    elif kind == "none":
        src = None
    else:
        raise ValueError(f"unknown traffic kind {kind!r}")
    if spec:
        raise ValueError(f"unknown {kind} traffic field(s): {', '.join(sorted(spec))}")
    return src
