import io

import pytest
from hypothesis import given, strategies as st

from bladesim.metrics import delivered
from bladesim.scenario import run
from bladesim.traffic import (FrameSource, PeriodicSource, SaturatedSource, TraceParseError, TraceRecord,
                              TraceSource, make_source, parse_trace)


def drain(src, limit=10**6):
    out = []
    while len(out) < limit:
        nxt = src.next_arrival(0)
        if nxt is None:
            break
        out.append(nxt)
    return out


def test_frame_source_50kb_at_60fps():
    src = FrameSource(fps=60, frame_size=50_000, mtu=1500)
    bursts = drain(src, 61)
    assert all(len(pk) == 34 for _, pk in bursts)
    assert sum(b for _, b, _ in bursts[0][1]) == 50_000 * 8
    assert [t for t, _ in bursts[:4]] == [0, 16_667, 33_333, 50_000]
    assert bursts[60][0] == 1_000_000
    assert {k for _, _, k in bursts[3][1]} == {3}


@given(st.integers(1, 10**6), st.integers(1, 9000))
def test_packetize_counts(size, mtu):
    parts = FrameSource(mtu=mtu).packetize(size)
    assert len(parts) == -(-size // mtu)
    assert sum(parts) == size and max(parts) <= mtu and min(parts) > 0


def test_frame_source_bitrate_with_size_distribution():
    sizes = [60_000, 90_000, 150_000, 104_000]
    src = make_source({"kind": "frames", "fps": 60, "frame_sizes": sizes, "stop_ms": 60_000})
    bursts = drain(src)
    bits = sum(b for _, pk in bursts for _, b, _ in pk)
    expected = 60 * sum(sizes) / len(sizes) * 8 * 60
    assert abs(bits - expected) / expected < 0.01


def test_saturated_source():
    s = SaturatedSource(start=5_000, stop=9_000)
    assert s.next_arrival(0) == (5_000, []) and s.next_arrival(0) is None
    assert not s.backlogged(4_999) and s.backlogged(5_000) and not s.backlogged(9_000)


def test_saturated_station_never_idles():
    from conftest import saturated
    log = run(saturated(3, "ieee", duration_ms=2000))
    for s in range(3):
        ps = sorted((p for p in log.ppdus if p.transmitter == s), key=lambda p: p.fes_start)
        assert all(b.fes_start == a.fes_end for a, b in zip(ps, ps[1:]))
    assert all(b[1] == 0 and b[2] == 2_000_000 for b in log.backlogs)


def test_trace_replay_offsets():
    src = TraceSource(parse_trace(["0,1500,down", "1000,200,down"]))
    assert drain(src) == [(0, [(0, 12000, None)]), (1000, [(1000, 1600, None)])]


def test_trace_header_comments_and_direction():
    text = "timestamp_us,size_bytes,direction\n# comment\n0,100,down\n5,60,up\n\n9,70\n"
    recs = parse_trace(io.StringIO(text))
    assert recs == [TraceRecord(0, 100, "down"), TraceRecord(5, 60, "up"), TraceRecord(9, 70, "down")]
    assert [r.timestamp for r in parse_trace(io.StringIO(text), "up")] == [5]


@pytest.mark.parametrize("text,line", [
    ("0,100,down\n5,abc,down\n", 2),
    ("0,100\n10,100\n5,100\n", 3),
    ("0,100,down\n1,0,down\n", 2),
    ("ts,size\n0,1,2,3\n", 2),
    ("0,100,sideways\n", 1),
])
def test_trace_errors_carry_line_numbers(text, line):
    with pytest.raises(TraceParseError) as exc:
        parse_trace(io.StringIO(text))
    assert exc.value.line == line and f"line {line}" in str(exc.value)


@given(st.lists(st.tuples(st.integers(0, 5000), st.integers(1, 9000)), min_size=1, max_size=60))
def test_trace_replay_lossless(rows):
    ts = sorted(t for t, _ in rows)
    recs = [TraceRecord(t, s) for t, (_, s) in zip(ts, rows)]
    src = TraceSource(recs, offset=100)
    out = [pkt for _, batch in drain(src) for pkt in batch]
    assert [p[0] for p in out] == [t + 100 for t in ts]
    assert sum(p[1] for p in out) == src.total_bytes * 8


def test_trace_through_simulation(tmp_path):
    lines = ["timestamp_us,size_bytes,direction"] + [f"{k * 2000},1500,down" for k in range(500)]
    (tmp_path / "t.csv").write_text("\n".join(lines) + "\n")
    d = {"name": "tr", "duration_ms": 1500, "seeds": [1], "topology": {"kind": "full", "n": 1},
         "policy": {"kind": "ieee"}, "traffic": {"kind": "trace", "path": "t.csv"}}
    from bladesim.scenario import Scenario
    log = run(Scenario.from_dict(d, base_dir=tmp_path))
    assert sum(p.size for p in delivered(log)) == 500 * 1500 * 8
    assert sum(len(p.packets) for p in delivered(log)) == 500


def test_periodic_source():
    src = PeriodicSource(1000, size=50, stop=3500)
    assert [t for t, _ in drain(src)] == [0, 1000, 2000, 3000]
    with pytest.raises(ValueError):
        PeriodicSource(0)


def test_make_source_errors():
    with pytest.raises(ValueError, match="unknown traffic kind"):
        make_source({"kind": "bursty"})
    with pytest.raises(ValueError, match="fsp"):
        make_source({"kind": "frames", "fsp": 30})
    assert make_source({"kind": "none"}) is None
