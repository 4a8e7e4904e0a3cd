"""
Tail latency under saturation
=============================

Eight AP-STA pairs share one channel and always have data. We compare how
long a PPDU takes from its first DIFS to its ACK under the standard binary
exponential backoff and under the MAR-driven window.
"""

# %%
import numpy as np

from bladesim import metrics as M
from bladesim.scenario import run

base = {"name": "demo", "duration_ms": 20_000, "warmup_ms": 1000, "seeds": [1],
        "topology": {"kind": "full", "n": 8}, "record_emissions": False}

logs = {}
for kind in ("ieee", "blade", "idlesense", "dda"):
    logs[kind] = run(dict(base, policy={"kind": kind}))

# %%
# Percentiles of the frame-exchange duration. The medians are close; the
# tail is where doubling the window after every loss hurts.
print(f"{'policy':10s} {'p50':>8s} {'p99':>8s} {'p99.9':>8s} {'Mbit/s':>8s}")
for kind, log in logs.items():
    d = M.fes_delays(log)
    print(f"{kind:10s} " + " ".join(f"{M.percentile(d, q) / 1000:8.1f}" for q in (50, 99, 99.9))
          + f" {M.throughput_mbps(log).mean():8.1f}")

# %%
# Where does the tail come from? Count retransmissions per delivered PPDU.
for kind in ("ieee", "blade"):
    h = M.retransmission_histogram(logs[kind])
    print(kind, {k: f"{v:.1%}" for k, v in h.items()})

# %%
# Windows of 100 ms in which a station delivered nothing.
for kind in ("ieee", "blade"):
    rates = [M.starvation_rate(logs[kind], s) for s in range(8)]
    print(f"{kind}: starvation {np.mean(rates):.1%} (worst station {max(rates):.1%})")
