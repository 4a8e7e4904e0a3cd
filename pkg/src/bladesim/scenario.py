"""Scenario files and the simulation driver.

A scenario is a TOML document::

    name = "saturated_n8"
    duration_ms = 10000
    warmup_ms = 1000
    seeds = [1, 2, 3]

    [phy]                 # any PhyParams field
    rts_cts = false

    [topology]
    kind = "full"         # full | matrix | three_rooms
    n = 8

    [policy]              # default for every station
    kind = "blade"

    [traffic]             # default for every station
    kind = "saturated"

    [[groups]]            # per-station overrides
    name = "legacy"
    stations = [0, 1]
    policy = { kind = "ieee" }

    [[variants]]          # named copies with dotted-path assignments
    name = "ieee"
    set = { "policy.kind" = "ieee" }

Dotted paths may index lists: ``"groups.0.policy.mar_tar"``.
"""
from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .engine import Event, EventKind, EventQueue, Medium, Topology
from .eventlog import EventLog
from .mac import PhyParams, Station
from .policy import make_policy
from .traffic import make_source

PHY_FIELDS = {f.name for f in fields(PhyParams)}


class ScenarioError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class Scenario:
    name: str
    data: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls(data.get("name", path.stem), data, path.parent)

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "Scenario":
        return cls(data.get("name", "scenario"), copy.deepcopy(data), Path(base_dir or Path.cwd()))

    @property
    def seeds(self) -> list[int]:
        return list(self.data.get("seeds", []))

    @property
    def variants(self) -> list[str]:
        return [v.get("name", f"v{i}") for i, v in enumerate(self.data.get("variants", []))] or ["default"]

    def with_overrides(self, assignments: dict) -> "Scenario":
        data = copy.deepcopy(self.data)
        for k, v in assignments.items():
            set_path(data, k, v)
        return Scenario(self.name, data, self.base_dir)

    def resolved(self, variant: str | None = None) -> dict:
        data = copy.deepcopy(self.data)
        vs = data.pop("variants", [])
        if variant not in (None, "default"):
            match = [v for i, v in enumerate(vs) if v.get("name", f"v{i}") == variant]
            if not match:
                raise ScenarioError([f"variants: no variant named {variant!r}"])
            for k, val in match[0].get("set", {}).items():
                set_path(data, k, val)
        return data


def set_path(data, path: str, value) -> None:
    parts = path.split(".")
    cur = data
    for i, p in enumerate(parts):
        last = i == len(parts) - 1
        key = int(p) if isinstance(cur, list) else p
        if last:
            cur[key] = value
        else:
            if isinstance(cur, dict) and key not in cur:
                cur[key] = {}
            cur = cur[key]


def parse_value(text: str):
    """Parse an override value with TOML rules; bare words stay strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def build_topology(spec: dict) -> Topology:
    kind = spec.get("kind", "full")
    if kind == "full":
        return Topology.fully_connected(int(spec.get("n", 1)))
    if kind == "three_rooms":
        return Topology.three_rooms(int(spec.get("per_room", 1)))
    if kind == "matrix":
        return Topology(spec["sense"], spec.get("rx_hears"), spec.get("names"))
    raise ValueError(f"unknown topology kind {kind!r}")


def station_configs(data: dict, n: int) -> list[dict]:
    out = []
    for i in range(n):
        cfg = {"policy": dict(data.get("policy", {"kind": "blade"})),
               "traffic": dict(data.get("traffic", {"kind": "saturated"})),
               "group": "all"}
        for g in data.get("groups", []):
            if i in g.get("stations", []):
                for key in ("policy", "traffic"):
                    over = g.get(key, {})
                    # a different kind starts from scratch instead of inheriting foreign fields
                    if "kind" in over and over["kind"] != cfg[key].get("kind"):
                        cfg[key] = {}
                    cfg[key].update(over)
                cfg["group"] = g.get("name", cfg["group"])
        out.append(cfg)
    return out


def validate(scenario: Scenario) -> list[str]:
    """Every problem found, each prefixed with the offending field path."""
    errs = []
    d = scenario.data
    if not d.get("seeds"):
        errs.append("seeds: seed list empty")
    elif not all(isinstance(s, int) and s >= 0 for s in d["seeds"]):
        errs.append("seeds: seeds must be non-negative integers")
    if not isinstance(d.get("duration_ms"), (int, float)) or d["duration_ms"] <= 0:
        errs.append("duration_ms: must be > 0")
    if d.get("warmup_ms", 0) < 0 or d.get("warmup_ms", 0) >= d.get("duration_ms", 0) > 0:
        errs.append("warmup_ms: must lie in [0, duration_ms)")
    for k in d.get("phy", {}):
        if k not in PHY_FIELDS:
            errs.append(f"phy.{k}: unknown field")
    names = [v.get("name", f"v{i}") for i, v in enumerate(d.get("variants", []))]
    if len(set(names)) != len(names):
        errs.append("variants: duplicate names")
    for variant in scenario.variants:
        prefix = "" if variant == "default" else f"variants[{variant}]."
        try:
            data = scenario.resolved(variant)
        except (ScenarioError, KeyError, IndexError, TypeError, ValueError) as exc:
            errs.append(f"{prefix}set: {exc}")
            continue
        errs.extend(prefix + e for e in _validate_resolved(data, scenario.base_dir))
    return errs


def _validate_resolved(data: dict, base_dir: Path) -> list[str]:
    errs = []
    try:
        phy = PhyParams(**{k: v for k, v in data.get("phy", {}).items() if k in PHY_FIELDS})
    except (ValueError, TypeError) as exc:
        errs.append(f"phy: {exc}")
        phy = PhyParams()
    try:
        topo = build_topology(data.get("topology", {}))
    except (ValueError, KeyError, TypeError) as exc:
        return errs + [f"topology: {exc}"]
    for gi, g in enumerate(data.get("groups", [])):
        for s in g.get("stations", []):
            if not isinstance(s, int) or not 0 <= s < topo.n:
                errs.append(f"groups[{gi}].stations: station {s!r} not defined (n={topo.n})")
    for i, cfg in enumerate(station_configs(data, topo.n)):
        try:
            make_policy(cfg["policy"], n_stations=topo.n, eta=phy.eta)
        except (ValueError, TypeError, KeyError) as exc:
            errs.append(f"stations[{i}].policy: {exc}")
        try:
            make_source(cfg["traffic"], base_dir=base_dir)
        except (ValueError, TypeError, KeyError, OSError) as exc:
            errs.append(f"stations[{i}].traffic: {exc}")
    return errs


def station_seed(seed: int, station: int, stream: int = 0) -> int:
    """Independent per-station seed: adding stations never changes another's draws."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(station, stream))
    return int(ss.generate_state(2, np.uint64)[0])


class Simulation:
    def __init__(self, data: dict, seed: int, base_dir: Path | None = None):
        self.data = data
        self.seed = seed
        self.phy = PhyParams(**data.get("phy", {}))
        self.topology = build_topology(data.get("topology", {}))
        n = self.topology.n
        self.queue = EventQueue()
        self.medium = Medium(self.topology, self.queue)
        self.log = EventLog(n, int(data.get("mar_window_ms", 1000) * 1000), data.get("record_emissions", True))
        self.log.names = list(self.topology.names)
        self.log.warmup = int(data.get("warmup_ms", 0) * 1000)
        self.configs = station_configs(data, n)
        self.stations = []
        for i, cfg in enumerate(self.configs):
            n_sense = sum(self.topology.sense[i])
            policy = make_policy(cfg["policy"], n_stations=n_sense, eta=self.phy.eta)
            source = make_source(cfg["traffic"], base_dir=base_dir)
            rng = random.Random(station_seed(seed, i))
            self.stations.append(Station(i, self.phy, policy, self.medium, self.queue, rng, self.log, source))
            t = cfg["traffic"]
            self.log.flows.append([i, cfg["group"], policy.name, t.get("kind", "saturated"),
                                   int(t.get("start_ms", 0) * 1000),
                                   None if t.get("stop_ms") is None else int(t["stop_ms"] * 1000)])
        self.medium.listeners = self.stations
        for st in self.stations:
            self._schedule_arrival(st, 0)

    def _schedule_arrival(self, st: Station, now: int) -> None:
        if st.source is None:
            return
        nxt = st.source.next_arrival(now)
        if nxt is not None:
            self.queue.schedule(Event(max(nxt[0], now), EventKind.ARRIVAL_DUE, st.id, payload=nxt[1]))

    def run_until(self, end: int) -> EventLog:
        q = self.queue
        stations = self.stations
        medium = self.medium
        log = self.log
        K = EventKind
        while q._heap and q._heap[0][0] <= end:
            ev = q.pop()
            k = ev.kind
            if k is K.TX_START:
                stations[ev.subject].on_tx_start(ev.token)
            elif k is K.TX_END:
                medium.end_emission(ev.payload)
                stations[ev.subject].on_emission_end(ev.payload)
            elif k is K.ACK_TIMEOUT:
                stations[ev.subject].on_ack_timeout(ev.token)
            elif k is K.NAV_END:
                medium.on_nav_end(ev.subject)
            elif k is K.ARRIVAL_DUE:
                st = stations[ev.subject]
                pkts = ev.payload
                if pkts and pkts[0][2] is not None:
                    log.frame_generated(st.id, pkts[0][2], ev.time, len(pkts), sum(p[1] for p in pkts) // 8)
                st.on_arrival(pkts)
                self._schedule_arrival(st, ev.time)
            else:
                stations[ev.subject].on_response_due(k)
        q.now = max(q.now, end)
        log.airtime = [list(a) for a in medium.close_accounting(end)]
        for st in stations:
            st.close(end)
        log.end_time = end
        return log


def build_simulation(scenario, seed: int | None = None, variant: str | None = None) -> Simulation:
    if not isinstance(scenario, Scenario):
        scenario = Scenario.from_dict(scenario)
    errs = validate(scenario)
    if errs:
        raise ScenarioError(errs)
    if seed is None:
        seed = scenario.seeds[0]
    return Simulation(scenario.resolved(variant), seed, scenario.base_dir)


def run(scenario, seed: int | None = None, variant: str | None = None, duration_ms: float | None = None) -> EventLog:
    """Build and run to the scenario's duration (or ``duration_ms``)."""
    if not isinstance(scenario, Scenario):
        scenario = Scenario.from_dict(scenario)
    sim = build_simulation(scenario, seed, variant)
    dur = duration_ms if duration_ms is not None else sim.data["duration_ms"]
    return sim.run_until(int(round(dur * 1000)))
