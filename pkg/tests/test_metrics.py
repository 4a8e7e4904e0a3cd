import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bladesim import metrics as M
from bladesim.eventlog import EventLog
from bladesim.mac import Attempt, Ppdu
from bladesim.scenario import run

from conftest import saturated


def test_percentile_examples():
    assert M.percentile([1, 2, 3, 4], 50) == 2
    assert M.percentile([4, 1, 3, 2], 100) == 4
    assert M.percentile([4, 1, 3, 2], 0) == 1
    with pytest.raises(ValueError):
        M.percentile([], 50)
    with pytest.raises(ValueError):
        M.percentile([1], 101)


@given(st.lists(st.integers(-1000, 1000), min_size=1), st.floats(0, 100))
def test_percentile_is_a_member_and_monotone(xs, q):
    v = M.percentile(xs, q)
    assert v in xs
    assert M.percentile(xs, min(q + 5, 100)) >= v


def test_jain_examples():
    assert M.jain_fairness([3, 3, 3]) == pytest.approx(1.0)
    assert M.jain_fairness([5, 0, 0, 0]) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        M.jain_fairness([])


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=20))
def test_jain_bounds(xs):
    j = M.jain_fairness(xs)
    assert 1 / len(xs) - 1e-9 <= j <= 1 + 1e-9


def test_stall_rate_counting():
    assert M.stall_rate([10_000] * 50) == 0
    lat = [1000] * 9999 + [250_000]
    assert M.stall_rate(lat) == pytest.approx(1e-4)
    assert M.stall_rate([math.inf, 1]) == 0.5


def _fake_log(deliveries, n=1, end=1_000_000):
    log = EventLog(n)
    log.end_time = end
    for k, (s, t, size) in enumerate(deliveries):
        p = Ppdu(k, s, s + n, size, t - 100, t - 100, [], [Attempt(t - 90, 50, 0, 0, 15, 0, "ok")], fes_end=t)
        log.ppdus.append(p)
    return log


def test_windowed_bytes_tile_and_conserve():
    log = _fake_log([(0, 50_000, 8000), (0, 99_999, 800), (0, 100_000, 80), (0, 999_999, 8)])
    w = M.windowed_bytes(log, 0, 100_000)
    assert len(w) == 10 and list(w[:2]) == [1100, 10] and w[-1] == 1
    assert w.sum() == sum(p.size // 8 for p in log.ppdus)
    assert M.starvation_rate(log, 0) == pytest.approx(0.7)


def test_starvation_and_drought_examples():
    log = run(saturated(1, "ieee", duration_ms=2000))
    assert M.starvation_rate(log, 0) == 0.0
    assert M.drought_rate(log, 0) == 0.0
    d = saturated(2, "ieee", duration_ms=2000)
    d["groups"] = [{"stations": [1], "traffic": {"kind": "none"}}]
    log = run(d)
    assert M.starvation_rate(log, 1) == 1.0
    assert M.drought_rate(log, 1) == 0.0   # never backlogged, so no window counts
    with pytest.raises(ValueError):
        M.starvation_rate(_fake_log([], end=50_000), 0)


def test_drought_only_counts_backlogged_windows():
    log = _fake_log([(0, 100_000, 8000)], end=1_000_000)
    log.backlogs = [(0, 0, 150_000), (0, 500_000, 700_000)]
    # windows 0 (delivered) and 2..3 (backlogged, empty) count
    assert M.drought_rate(log, 0) == pytest.approx(2 / 3)


def test_blade_has_fewer_droughts_than_ieee_at_n16():
    rates = {}
    for kind in ("blade", "ieee"):
        log = run(saturated(16, kind, duration_ms=10_000, warmup_ms=1000))
        rates[kind] = (np.mean([M.drought_rate(log, s) for s in range(16)]),
                       np.mean([M.starvation_rate(log, s) for s in range(16)]))
    assert rates["blade"][0] < rates["ieee"][0]
    assert rates["ieee"][1] >= 2 * rates["blade"][1]


def test_single_station_never_retransmits():
    log = run(saturated(1, "blade", duration_ms=1000))
    assert M.retransmission_histogram(log) == {0: 1.0}


def test_retransmission_histogram_sums_to_one(blade4_log):
    h = M.retransmission_histogram(blade4_log)
    assert sum(h.values()) == pytest.approx(1.0)
    assert list(h) == sorted(h)
    bo = M.backoff_per_attempt(blade4_log)
    assert len(bo[0]) == len(M.delivered(blade4_log))


def test_fes_decomposition_identity(ieee4_log):
    from bladesim.mac import PhyParams
    for p in M.delivered(ieee4_log):
        parts = M.fes_decomposition(p, PhyParams())
        assert parts["residual"] == 0
        assert parts["total"] >= parts["phy"] + parts["ack"]


def test_convergence_single_station_is_zero():
    log = run(saturated(1, "blade", duration_ms=1000))
    assert M.convergence_time(log, 0) == 0.0


def test_convergence_not_converged_sentinel():
    log = EventLog(2)
    log.end_time = 2_000_000
    log.flows = [[0, "a", "blade", "saturated", 0, None], [1, "a", "blade", "saturated", 0, None]]
    log.cw_trace = [(10, 0, 15.0, "ack"), (10, 1, 900.0, "ack")]
    assert M.convergence_time(log, 0) == M.NOT_CONVERGED
    log.cw_trace.append((1_000_000, 1, 16.0, "ack"))
    assert M.convergence_time(log, 0) == 1_000_000


def test_unequal_start_windows_converge():
    d = saturated(2, "blade", duration_ms=10_000)
    d["groups"] = [{"stations": [1], "policy": {"initial_cw": 1023}}]
    log = run(d)
    s = M.cw_series(log)

    def mean_cw(station, a, b):
        return np.mean([c for t, c in s[station] if a <= t < b])

    gaps = [abs(mean_cw(1, a, a + 250_000) - mean_cw(0, a, a + 250_000)) for a in (0, 500_000, 1_500_000, 3_000_000)]
    assert all(x > y for x, y in zip(gaps, gaps[1:]))
    # the larger window shrinks faster than a fixed m_dec step would allow
    first = s[1][:20]
    assert first[-1][1] < 1023 * 0.95 ** 20
    assert M.convergence_time(log, 0) < 8_000_000


def test_active_stations_and_groups():
    d = saturated(3, "blade", duration_ms=100)
    d["groups"] = [{"name": "late", "stations": [2], "traffic": {"start_ms": 50, "stop_ms": 80}}]
    log = run(d)
    assert M.active_stations(log, 0) == [0, 1]
    assert M.active_stations(log, 60_000) == [0, 1, 2]
    assert M.active_stations(log, 80_000) == [0, 1]
    assert M.group_of(log) == {0: "all", 1: "all", 2: "late"}


def test_summary_columns(blade4_log):
    row = M.summary(blade4_log, 0)
    for k in ("ppdus", "dropped", "throughput_mbps", "collision_rate", "mar", "mean_cw",
              "fes_p50_us", "fes_p99.9_us", "fes_p99.99_us"):
        assert k in row
    assert row["fes_p50_us"] <= row["fes_p99.9_us"]
