"""
Sharing the air with others
===========================

Two situations where not every station runs the same algorithm or hears
the same things: standard stations next to MAR-driven ones, and three rooms
in a row where the end rooms cannot hear each other.
"""

# %%
from bladesim import metrics as M
from bladesim.cli import load_scenario
from bladesim.scenario import run

# Two MAR-driven pairs against two standard pairs. A higher target makes the
# MAR-driven group more aggressive; the standard group pays for it.
sc = load_scenario("coexist").with_overrides({"duration_ms": 10_000})
print(f"{'variant':8s} {'mar-driven':>10s} {'standard':>10s}   Mbit/s")
for v in sc.variants:
    log = run(sc, seed=1, variant=v)
    print(f"{v:8s} {M.throughput_mbps(log, [0, 1]).mean():10.1f} {M.throughput_mbps(log, [2, 3]).mean():10.1f}")

# %%
# Three rooms in a row. The middle transmitter hears both neighbours and
# defers to both (exposed); the ends cannot hear each other and collide at
# the receivers (hidden). RTS/CTS lets the ends learn about each other
# through the CTS.
sc = load_scenario("hidden_terminal").with_overrides({"duration_ms": 10_000})
for v in sc.variants:
    log = run(sc, seed=1, variant=v)
    mid, ends = M.fes_delays(log, 1), M.fes_delays(log, [0, 2])
    p99 = lambda d: f"{M.percentile(d, 99) / 1000:7.1f} ms" if d else "  nothing delivered"
    print(f"{v:12s} p99 middle={p99(mid)}  ends={p99(ends)}  "
          f"Mbit/s={M.throughput_mbps(log).mean():6.1f}")

# %%
# Without RTS/CTS the ends keep colliding. The standard rule backs off
# exponentially on every loss; the MAR-driven window only looks at what its
# own transmitter hears, which here says the channel is quiet, so the ends
# stay aggressive and mostly lose.
