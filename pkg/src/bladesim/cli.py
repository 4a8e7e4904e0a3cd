"""Command-line experiment runner.

    bladesim run <scenario> [--out DIR] [--seeds K] [--override key=value] [--jobs J]
    bladesim validate <scenario>
    bladesim analytics <table> [params]

``<scenario>`` is a path to a TOML file or the name of a bundled preset.
Results go to ``<out>/<scenario>/<variant>/<seed>/<metric>.csv`` with a
``summary.csv`` per scenario aggregating percentiles across seeds.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytics
from . import metrics as M
from .scenario import Scenario, ScenarioError, parse_value, run, validate


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("bladesim.presets").iterdir() if p.name.endswith(".toml"))


def load_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.exists():
        return Scenario.load(path)
    res = resources.files("bladesim.presets") / f"{ref}.toml"
    if res.is_file():
        with resources.as_file(res) as p:
            return Scenario.load(p)
    raise FileNotFoundError(f"no scenario file or preset named {ref!r} (presets: {', '.join(preset_names())})")


def _write_csv(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})


def metric_tables(log) -> dict[str, list[dict]]:
    """Per-run metric tables; the column sets are the stable output contract."""
    groups = M.group_of(log)
    names = log.names
    stations = []
    for s in range(log.n):
        row = {"station": s, "name": names[s], "group": groups[s]}
        row.update(M.summary(log, s))
        row["starvation_rate"] = M.starvation_rate(log, s) if log.end_time - log.warmup >= 100_000 else math.nan
        row["drought_rate"] = M.drought_rate(log, s) if log.end_time - log.warmup >= 200_000 else math.nan
        lat = M.frame_latencies(log, s)
        row["frames"] = len(lat)
        row["stall_rate"] = M.stall_rate(lat)
        stations.append(row)
    delays = [{"station": p.transmitter, "ppdu": p.id, "fes_start_us": p.fes_start,
               "fes_us": p.fes_end - p.fes_start, "attempts": len(p.attempts)}
              for p in M.delivered(log)]
    retx = [{"station": s, "retransmissions": k, "fraction": v}
            for s in range(log.n) for k, v in M.retransmission_histogram(log, s).items()]
    tput = []
    for s in range(log.n):
        for k, b in enumerate(M.windowed_bytes(log, s, 100_000)):
            tput.append({"station": s, "window_start_us": log.warmup + k * 100_000, "bytes": int(b)})
    cw = [{"t_us": t, "station": s, "cw": c, "event": k} for t, s, c, k in log.cw_trace]
    mar = [{"t_us": t, "station": s, "mar": m} for t, s, m in log.mar_samples]
    return {"stations": stations, "fes_delay": delays, "retransmissions": retx,
            "throughput": tput, "cw_trace": cw, "mar_samples": mar}


def _run_one(args):
    scenario, variant, seed, out = args
    log = run(scenario, seed=seed, variant=variant)
    tables = metric_tables(log)
    base = out / scenario.name / variant / str(seed)
    for name, rows in tables.items():
        _write_csv(base / f"{name}.csv", rows)
    rows = []
    groups = M.group_of(log)
    for g in sorted(set(groups.values())):
        members = [s for s, gg in groups.items() if gg == g]
        row = {"variant": variant, "seed": seed, "group": g}
        row.update(M.summary(log, members))
        rows.append(row)
    return variant, seed, rows, M.fes_delays(log)


def cmd_run(ns) -> int:
    scenario = load_scenario(ns.scenario)
    if ns.override:
        assignments = {}
        for item in ns.override:
            if "=" not in item:
                print(f"error: override {item!r} is not key=value", file=sys.stderr)
                return 2
            k, v = item.split("=", 1)
            assignments[k.strip()] = parse_value(v.strip())
        scenario = scenario.with_overrides(assignments)
    if ns.seeds is not None:
        base = scenario.seeds[0] if scenario.seeds else 1
        scenario = scenario.with_overrides({"seeds": list(range(base, base + ns.seeds))})
    errs = validate(scenario)
    if errs:
        for e in errs:
            print(f"error: {e}", file=sys.stderr)
        return 1
    out = Path(ns.out)
    jobs = [(scenario, v, s, out) for v in scenario.variants for s in scenario.seeds]
    if ns.jobs > 1:
        with ProcessPoolExecutor(ns.jobs) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    per_seed = []
    pooled: dict[str, list] = {}
    for variant, seed, rows, delays in results:
        per_seed.extend(rows)
        pooled.setdefault(variant, []).extend(delays)
    summary = []
    for variant in scenario.variants:
        rows = [r for r in per_seed if r["variant"] == variant]
        for g in sorted({r["group"] for r in rows}):
            rs = [r for r in rows if r["group"] == g]
            agg = {"variant": variant, "group": g, "seeds": len(rs)}
            for k in ("throughput_mbps", "collision_rate", "mar", "mean_cw",
                      "fes_p50_us", "fes_p99_us", "fes_p99.9_us"):
                agg[k] = float(np.nanmean([r[k] for r in rs]))
            summary.append(agg)
        d = pooled.get(variant, [])
        for row in summary:
            if row["variant"] == variant and d:
                row["pooled_fes_p99.9_us"] = M.percentile(d, 99.9)
    _write_csv(out / scenario.name / "summary.csv", summary)
    _write_csv(out / scenario.name / "per_seed.csv", per_seed)
    for row in summary:
        print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return 0


def cmd_validate(ns) -> int:
    try:
        scenario = load_scenario(ns.scenario)
    except Exception as exc:  # parse errors carry their own location
        print(f"error: {exc}", file=sys.stderr)
        return 1
    errs = validate(scenario)
    if errs:
        for e in errs:
            print(f"error: {e}", file=sys.stderr)
        return 1
    print("ok")
    return 0


def _floats(text: str | None, default):
    if text is None:
        return default
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_analytics(ns) -> int:
    if ns.table == "collision":
        ns_ = [int(x) for x in _floats(ns.n, list(range(2, 21)))]
        rows = analytics.collision_table(ns_, ns.cw_min, ns.r)
        for row in rows:
            row["rho_time_weighted"] = analytics.beb_collision_fixed_point_time_weighted(row["n"], ns.cw_min, ns.r)
    elif ns.table == "cost":
        n = int(_floats(ns.n, [8])[0])
        etas = _floats(ns.eta, [20, 81, 200, 500])
        mars = _floats(ns.mar, list(np.round(np.arange(0.01, 0.5, 0.01), 4)))
        rows = analytics.cost_table(n, etas, mars)
    elif ns.table == "chernoff":
        n_obs = int(ns.n_obs)
        rows = [{"n_obs": n_obs, "p": p, "delta": ns.delta, "bound": analytics.chernoff_bound(n_obs, p, ns.delta),
                 "se": analytics.standard_error(n_obs, p)} for p in _floats(ns.p, [0.05, 0.1, 0.15, 0.2])]
    else:
        print(f"error: unknown table {ns.table!r}", file=sys.stderr)
        return 2
    analytics.write_table(rows, sys.stdout, ns.delimiter)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bladesim", description="CSMA/CA contention simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario file or preset")
    r.add_argument("scenario")
    r.add_argument("--out", default="results")
    r.add_argument("--seeds", type=int, help="use K consecutive seeds starting at the first listed seed")
    r.add_argument("--override", action="append", metavar="KEY=VALUE",
                   help="dotted-path assignment, e.g. policy.mar_tar=0.25 (repeatable)")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario and list every error")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    a = sub.add_parser("analytics", help="emit an analytic table: collision | cost | chernoff")
    a.add_argument("table", choices=["collision", "cost", "chernoff"])
    a.add_argument("--n", help="comma-separated station counts")
    a.add_argument("--cw-min", type=float, default=15)
    a.add_argument("--r", type=int, default=6)
    a.add_argument("--eta", help="comma-separated eta values")
    a.add_argument("--mar", help="comma-separated MAR values")
    a.add_argument("--n-obs", type=int, default=300)
    a.add_argument("--p", help="comma-separated busy probabilities")
    a.add_argument("--delta", type=float, default=0.02)
    a.add_argument("--delimiter", default=",")
    a.set_defaults(func=cmd_analytics)
    sub.add_parser("presets", help="list bundled presets").set_defaults(
        func=lambda ns: print("\n".join(preset_names())) or 0)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
