"""Statistics derived from an EventLog.

All time arguments are integer microseconds. Unless stated otherwise,
metrics only look at PPDUs whose FES started after the log's warm-up.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict

import numpy as np

NOT_CONVERGED = math.inf


def percentile(series, q: float):
    """Nearest-rank percentile."""
    s = sorted(series)
    if not s:
        raise ValueError("percentile of an empty series")
    if not 0 <= q <= 100:
        raise ValueError("q must lie in [0, 100]")
    rank = max(1, math.ceil(q / 100.0 * len(s)))
    return s[rank - 1]


def _stations(log, station):
    if station is None:
        return set(range(log.n))
    if isinstance(station, int):
        return {station}
    return set(station)


def delivered(log, station=None, since: int | None = None) -> list:
    since = log.warmup if since is None else since
    st = _stations(log, station)
    return [p for p in log.ppdus if not p.dropped and p.transmitter in st and p.fes_start >= since]


def dropped(log, station=None) -> list:
    st = _stations(log, station)
    return [p for p in log.ppdus if p.dropped and p.transmitter in st and p.fes_start >= log.warmup]


def fes_delays(log, station=None) -> list[int]:
    return [p.fes_end - p.fes_start for p in delivered(log, station)]


def windowed_bytes(log, station, window_us: int, start: int | None = None, end: int | None = None) -> np.ndarray:
    """Bytes delivered per window, by ACK time; windows tile ``[start, end)``."""
    start = log.warmup if start is None else start
    end = log.end_time if end is None else end
    nwin = max((end - start) // window_us, 0)
    out = np.zeros(nwin, dtype=np.int64)
    st = _stations(log, station)
    for p in log.ppdus:
        if p.dropped or p.transmitter not in st or p.fes_end is None:
            continue
        k = (p.fes_end - start) // window_us
        if 0 <= k < nwin:
            out[k] += p.size // 8
    return out


def throughput_mbps(log, station=None, window_us: int = 100_000) -> np.ndarray:
    return windowed_bytes(log, station, window_us) * 8 / window_us


def starvation_rate(log, station, window_us: int = 100_000) -> float:
    w = windowed_bytes(log, station, window_us)
    if len(w) == 0:
        raise ValueError("run shorter than one window")
    return float(np.mean(w == 0))


def _backlogged_windows(log, station: int, start: int, window_us: int, nwin: int) -> np.ndarray:
    mask = np.zeros(nwin, dtype=bool)
    for s, a, b in log.backlogs:
        if s != station:
            continue
        lo = max((a - start) // window_us, 0)
        hi = min((b - 1 - start) // window_us, nwin - 1)
        if hi >= lo:
            mask[lo:hi + 1] = True
    return mask


def drought_rate(log, station, window_us: int = 200_000) -> float:
    """Fraction of backlogged windows with no delivery; windows with an empty queue don't count."""
    start = log.warmup
    w = windowed_bytes(log, station, window_us, start)
    if len(w) == 0:
        raise ValueError("run shorter than one window")
    mask = _backlogged_windows(log, station, start, window_us, len(w))
    if not mask.any():
        return 0.0
    return float(np.mean(w[mask] == 0))


def frame_latencies(log, station=None, threshold_us: int = 200_000):
    """Latency per frame; ``inf`` for frames never completed (dropped or still pending)."""
    st = _stations(log, station)
    out = []
    for (s, _key), (gen, _n, _got, done, _size) in sorted(log.frames.items()):
        if s not in st or gen < log.warmup or gen > log.end_time - threshold_us:
            continue
        out.append(math.inf if done is None else done - gen)
    return out


def stall_rate(latencies, threshold_us: int = 200_000) -> float:
    """Fraction of frames whose delivery latency exceeds the threshold."""
    lat = list(latencies)
    if not lat:
        return 0.0
    return sum(1 for x in lat if x > threshold_us) / len(lat)


def retransmission_histogram(log, station=None) -> dict[int, float]:
    """Fraction of delivered PPDUs by retransmission count (attempts - 1)."""
    ps = delivered(log, station)
    if not ps:
        return {}
    c = Counter(len(p.attempts) - 1 for p in ps)
    return {k: c[k] / len(ps) for k in sorted(c)}


def backoff_per_attempt(log, station=None) -> dict[int, list[int]]:
    out = defaultdict(list)
    for p in delivered(log, station):
        for i, a in enumerate(p.attempts):
            out[i].append(a.backoff)
    return dict(out)


def collision_rate(log, station=None, since: int | None = None, until: int | None = None) -> float:
    since = log.warmup if since is None else since
    until = log.end_time if until is None else until
    st = _stations(log, station)
    n = fail = 0
    for p in log.ppdus:
        if p.transmitter not in st:
            continue
        for a in p.attempts:
            if since <= a.t_tx < until and a.outcome:
                n += 1
                fail += a.outcome == "fail"
    return fail / n if n else 0.0


def channel_mar(log, station=None, since: int | None = None, until: int | None = None) -> float:
    """Access rate from the channel counters (transmission events over events plus idle slots)."""
    since = log.warmup if since is None else since
    until = log.end_time if until is None else until
    w = log.mar_window_us
    tx = idle = 0
    for s in _stations(log, station):
        for k, (a, b) in log.channel[s].items():
            if since <= k * w and (k + 1) * w <= until:
                tx += a
                idle += b
    return tx / (tx + idle) if tx + idle else 0.0


def windowed_mar_and_collision(log, station=None) -> list[tuple[int, float, float]]:
    """Per counter window after warm-up: ``(start, mar, collision rate)``."""
    w = log.mar_window_us
    out = []
    k = -(-log.warmup // w)
    while (k + 1) * w <= log.end_time:
        out.append((k * w, channel_mar(log, station, k * w, (k + 1) * w),
                    collision_rate(log, station, k * w, (k + 1) * w)))
        k += 1
    return out


def mean_cw(log, station=None, since: int | None = None) -> float:
    since = log.warmup if since is None else since
    st = _stations(log, station)
    xs = [c for t, s, c, k in log.cw_trace if k == "ack" and s in st and t >= since]
    return float(np.mean(xs)) if xs else math.nan


def cw_series(log, kind: str = "ack") -> dict[int, list[tuple[int, float]]]:
    out = defaultdict(list)
    for t, s, c, k in log.cw_trace:
        if k == kind:
            out[s].append((t, c))
    return dict(out)


def active_stations(log, t: int) -> list[int]:
    out = []
    for sid, _group, _pol, _kind, start, stop in log.flows:
        if start <= t and (stop is None or t < stop):
            out.append(sid)
    return out


def convergence_time(log, event_time: int, band: float = 0.25, hold_us: int = 500_000,
                     horizon: int | None = None, initial_cw: float = 15.0) -> float:
    """Time after ``event_time`` until every active station's post-ACK cw stays
    within ``band`` of the common mean for ``hold_us``; ``NOT_CONVERGED`` otherwise."""
    horizon = log.end_time if horizon is None else horizon
    active = active_stations(log, event_time)
    if len(active) <= 1:
        return 0.0
    series = cw_series(log)
    cur = {}
    changes = []
    for s in active:
        cur[s] = initial_cw
        for t, c in series.get(s, []):
            if t <= event_time:
                cur[s] = c
            elif t < horizon:
                changes.append((t, s, c))
    changes.sort()

    def in_band():
        vals = list(cur.values())
        m = sum(vals) / len(vals)
        return all(abs(v - m) <= band * m for v in vals)

    run_start = event_time if in_band() else None
    for t, s, c in changes:
        if run_start is not None and t - run_start >= hold_us:
            return float(run_start - event_time)
        cur[s] = c
        ok = in_band()
        if ok and run_start is None:
            run_start = t
        elif not ok:
            run_start = None
    if run_start is not None and horizon - run_start >= hold_us:
        return float(run_start - event_time)
    return NOT_CONVERGED


def jain_fairness(xs) -> float:
    x = np.asarray(list(xs), dtype=float)
    if x.size == 0:
        raise ValueError("jain_fairness of an empty set")
    sq = float(np.sum(x * x))
    if sq == 0:
        return 1.0
    return float(np.sum(x) ** 2 / (x.size * sq))


def windowed_jain(log, stations, window_us: int = 1_000_000, start: int | None = None,
                  end: int | None = None) -> list[float]:
    per = [windowed_bytes(log, s, window_us, start, end) for s in stations]
    if not per or len(per[0]) == 0:
        return []
    return [jain_fairness([p[k] for p in per]) for k in range(len(per[0]))]


def fes_decomposition(ppdu, phy) -> dict:
    """Split an FES into contention, DIFS, PHY and SIFS/ACK parts from its timestamps."""
    from .mac import contention_interval

    n = len(ppdu.attempts)
    cont = [contention_interval(ppdu, i, phy) for i in range(n)]
    total = ppdu.fes_end - ppdu.fes_start
    parts = {
        "contention": sum(cont),
        "difs": n * phy.difs,
        "phy": sum(a.phy for a in ppdu.attempts),
        "sifs": n * phy.sifs,
        "ack": phy.ack_duration if not ppdu.dropped else 0,
    }
    parts["total"] = total
    parts["residual"] = total - sum(v for k, v in parts.items() if k != "total")
    return parts


def airtime_residual(log) -> list[int]:
    """Per station: run length minus idle + busy + own-TX time (should be 0)."""
    return [log.end_time - sum(a) for a in log.airtime]


def group_of(log) -> dict[int, str]:
    return {f[0]: f[1] for f in log.flows}


def summary(log, station=None) -> dict:
    d = fes_delays(log, station)
    row = {
        "ppdus": len(d),
        "dropped": len(dropped(log, station)),
        "throughput_mbps": float(np.mean(throughput_mbps(log, station))) if log.end_time > log.warmup else 0.0,
        "collision_rate": collision_rate(log, station),
        "mar": channel_mar(log, station),
        "mean_cw": mean_cw(log, station),
    }
    for q in (50, 90, 99, 99.9, 99.99):
        row[f"fes_p{q:g}_us"] = percentile(d, q) if d else math.nan
    return row
