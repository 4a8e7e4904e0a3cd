import pytest
from hypothesis import given, settings, strategies as st

from bladesim.mac import Attempt, PhyParams, Ppdu, contention_interval
from bladesim.metrics import delivered, dropped, fes_decomposition
from bladesim.scenario import run

from conftest import saturated
from helpers import sim_with_draws

PHY = PhyParams()
DATA = PHY.data_duration()


def test_phy_defaults():
    assert DATA == 2707
    assert PHY.eta == pytest.approx((2707 + 16 + 44 + 9 + 34) / 9)
    with pytest.raises(ValueError):
        PhyParams(sifs=40, difs=34)


@pytest.mark.parametrize("cw,hi", [(0, 0), (15, 15), (31.7, 31), (1023, 1023)])
def test_draw_range(cw, hi):
    sim = sim_with_draws(saturated(1, "ieee"), [[]])
    import random
    st = sim.stations[0]
    st.rng = random.Random(5)
    st.policy.cw = cw
    draws = {st.begin_contention() for _ in range(4000)}
    assert min(draws) == 0 and max(draws) == hi


@pytest.mark.parametrize("b", [0, 3, 15])
def test_single_station_fes(b):
    sim = sim_with_draws(saturated(1, "ieee"), [[b]])
    log = sim.run_until(4000)
    p = log.ppdus[0]
    assert p.fes_start == 0
    assert p.fes_end - p.fes_start == PHY.difs + b * PHY.slot + DATA + PHY.sifs + PHY.ack_duration
    assert contention_interval(p, 0, PHY) == b * PHY.slot


def test_freeze_and_resume():
    # B draws 2 and wins; A drew 5, keeps 3 and resumes after B's ACK
    sim = sim_with_draws(saturated(2, "ieee"), [[5], [2, 15]])
    log = sim.run_until(4000)
    first = log.ppdus[0]
    assert first.transmitter == 1 and first.attempts[0].t_tx == PHY.difs + 2 * PHY.slot
    ack_end = first.fes_end
    st_a = sim.stations[0]
    t_a = st_a.hol.attempts[0].t_tx
    assert t_a == ack_end + PHY.difs + 3 * PHY.slot
    assert st_a.hol.attempts[0].gt_contention == contention_interval(st_a.hol, 0, PHY)


def test_equal_draws_collide():
    sim = sim_with_draws(saturated(2, "ieee"), [[4, 0], [4, 9]])
    log = sim.run_until(8000)
    p = [q for q in log.ppdus if q.transmitter == 0][0]
    assert [a.outcome for a in p.attempts] == ["fail", "ok"]
    # retry waits for the ACK timeout (SIFS + ACK + slot) and DIFS, rounded up
    # onto the slot grid that started DIFS after the collided frames ended
    t0 = p.attempts[0].t_tx
    end = t0 + DATA
    earliest = end + PHY.sifs + PHY.ack_duration + PHY.slot + PHY.difs
    grid = end + PHY.difs
    expected = grid + -(-(earliest - grid) // PHY.slot) * PHY.slot
    assert p.attempts[1].t_tx == expected
    assert contention_interval(p, 1, PHY) == expected - end - PHY.sifs - PHY.difs


def test_forced_collisions_drop_after_retry_limit():
    pol = {"kind": "ieee", "cw_min": 0, "cw_max": 0}
    log = run(saturated(2, pol, duration_ms=200))
    d = dropped(log)
    assert d and not delivered(log)
    assert all(len(p.attempts) == PHY.retry_limit + 1 for p in d)
    assert all(a.outcome == "fail" for p in d for a in p.attempts)


def test_contention_interval_examples_and_range():
    p = Ppdu(1, 0, 1, 800_000, 0, fes_start=100)
    p.attempts = [Attempt(200, 2707, 100, 7, 15, 66, "fail"), Attempt(3100, 2707, 0, 3, 7.5, 0, "ok")]
    assert contention_interval(p, 0, PHY) == 200 - 100 - 34
    assert contention_interval(p, 1, PHY) == 3100 - 200 - 2707 - 16 - 34
    with pytest.raises(IndexError):
        contention_interval(p, 2, PHY)
    with pytest.raises(IndexError):
        contention_interval(p, -1, PHY)


def _check_timestamps(log, phy):
    n = 0
    for p in log.ppdus:
        for i, a in enumerate(p.attempts):
            assert contention_interval(p, i, phy) == a.gt_contention
            assert a.gt_contention >= a.backoff * phy.slot
            n += 1
        if not p.dropped:
            assert fes_decomposition(p, phy)["residual"] == 0
    return n


@pytest.mark.parametrize("kind", ["blade", "ieee", "idlesense"])
def test_timestamp_reconstruction_matches_simulator(kind):
    log = run(saturated(8, kind, duration_ms=10_000))
    assert _check_timestamps(log, PHY) > 2000


@pytest.mark.parametrize("rts", [False, True])
def test_timestamp_reconstruction_hidden_stations(rts):
    d = saturated(1, "blade", duration_ms=3000, phy={"rts_cts": rts})
    d["topology"] = {"kind": "three_rooms", "per_room": 2}
    log = run(d)
    assert _check_timestamps(log, PhyParams(rts_cts=rts)) > 100


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 10), st.integers(0, 9999))
def test_cw_stays_in_range_and_retries_bounded(n, seed):
    log = run(saturated(n, "blade", duration_ms=500, seed=seed))
    assert all(15 <= c <= 1023 for _, _, c, _ in log.cw_trace)
    assert all(len(p.attempts) <= PHY.retry_limit + 1 for p in log.ppdus)
    assert all(a.backoff <= int(a.cw) for p in log.ppdus for a in p.attempts)
