import pytest

from bladesim.scenario import run


def saturated(n, policy="blade", duration_ms=2000, warmup_ms=0, seed=1, **extra):
    d = {"name": "t", "duration_ms": duration_ms, "warmup_ms": warmup_ms, "seeds": [seed],
         "topology": {"kind": "full", "n": n},
         "policy": policy if isinstance(policy, dict) else {"kind": policy}}
    d.update(extra)
    return d


@pytest.fixture(scope="session")
def blade4_log():
    return run(saturated(4, "blade", duration_ms=10_000))


@pytest.fixture(scope="session")
def ieee4_log():
    return run(saturated(4, "ieee", duration_ms=10_000))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
