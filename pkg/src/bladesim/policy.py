"""Contention-window control policies.

Every policy exposes the same four entry points, driven by the station's
MAC: ``observe(state, amount)`` for channel observations, ``on_ack`` and
``on_failure`` for frame outcomes, ``on_drop`` when the retry limit is
exceeded, and ``current_cw()``.

``observe`` receives ``(ChannelState.IDLE, n)`` for ``n`` idle backoff slots
and ``(ChannelState.BUSY, k)`` for ``k`` transmission events.

IdleSense and DDA are reference baselines, approximate: they follow the
intent of the original schemes (idle-slot targeting, delay-bounded windows)
but not their full pseudocode.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import ChannelState
from .mar import MarObserver


@dataclass(frozen=True)
class BladeParams:
    mar_tar: float = 0.1
    mar_max: float = 0.35
    cw_min: float = 15
    cw_max: float = 1023
    m_inc: float = 500
    m_dec: float = 0.95
    a_inc: float = 15
    a_fail: float = 5
    n_obs: int = 300

    def __post_init__(self):
        if not 0 < self.mar_tar < 1 or not 0 < self.mar_max < 1:
            raise ValueError("mar_tar and mar_max must lie in (0, 1)")
        if self.mar_tar > self.mar_max:
            raise ValueError("mar_tar must not exceed mar_max")
        if not self.cw_min < self.cw_max:
            raise ValueError("cw_min must be < cw_max")
        if not 0 < self.m_dec < 1:
            raise ValueError("m_dec must lie in (0, 1)")
        if self.a_inc < 0 or self.a_fail < 0:
            raise ValueError("a_inc and a_fail must be >= 0")
        if self.n_obs < 1:
            raise ValueError("n_obs must be >= 1")

    @classmethod
    def half_range_m_inc(cls, **kw) -> "BladeParams":
        """Preset with ``m_inc = (cw_max - cw_min) / 2``."""
        p = cls(**kw)
        return replace(p, m_inc=(p.cw_max - p.cw_min) / 2)


@dataclass
class BladeState:
    cw: float
    cw_fail: float
    first_rtx: bool = True
    observer: MarObserver = field(default_factory=MarObserver)


def blade_on_ack(state: BladeState, params: BladeParams) -> BladeState:
    """Restore the pre-failure window, then apply one HIMD step if enough samples."""
    state.cw = state.cw_fail
    obs = state.observer
    if not obs.ready():
        return state
    mar = obs.compute_mar()
    cw = state.cw
    if mar > params.mar_tar:
        cw = (cw + cw * max(0.0, mar - params.mar_max)
              + params.m_inc * (min(mar, params.mar_max) - params.mar_tar) + params.a_inc)
    else:
        beta1 = 2.0 * mar / (params.mar_tar + mar) if mar > 0 else 0.0
        beta2 = params.m_dec - (1 - params.m_dec) * (cw - params.cw_min) / (params.cw_max - params.cw_min)
        cw = min(beta1, beta2, 1.0) * cw
    cw = min(max(cw, params.cw_min), params.cw_max)
    state.cw = cw
    state.cw_fail = cw
    state.first_rtx = True
    return state


def blade_on_failure(state: BladeState, params: BladeParams) -> BladeState:
    """Fast recovery: halve the window on the first retransmission only."""
    if state.first_rtx:
        state.cw_fail = min(state.cw + params.a_fail, params.cw_max)
        state.cw = max(state.cw_fail / 2.0, params.cw_min)
        state.first_rtx = False
    return state


class ContentionPolicy:
    name = "base"

    def current_cw(self) -> float:
        raise NotImplementedError

    def observe(self, state: ChannelState, amount: int) -> None:
        pass

    def on_ack(self, delay_us: int | None = None) -> None:
        pass

    def on_failure(self) -> None:
        pass

    def on_drop(self) -> None:
        pass

    def mar_sample(self) -> float | None:
        """MAR used by the last control update, if the policy computes one."""
        return None


class BladePolicy(ContentionPolicy):
    name = "blade"

    def __init__(self, params: BladeParams | None = None, fast_recovery: bool = True,
                 initial_cw: float | None = None):
        self.params = params or BladeParams()
        self.fast_recovery = fast_recovery
        p = self.params
        cw = p.cw_min if initial_cw is None else min(max(initial_cw, p.cw_min), p.cw_max)
        self.state = BladeState(cw=cw, cw_fail=cw, observer=MarObserver(p.n_obs))
        self.last_mar: float | None = None
        self.updates = 0

    def current_cw(self) -> float:
        return self.state.cw

    def observe(self, state: ChannelState, amount: int) -> None:
        if state is ChannelState.IDLE:
            self.state.observer.record_idle(amount)
        else:
            self.state.observer.record_tx(amount)

    def on_ack(self, delay_us=None) -> None:
        obs = self.state.observer
        if obs.ready():
            self.last_mar = obs.n_tx / obs.samples
            self.updates += 1
        blade_on_ack(self.state, self.params)

    def on_failure(self) -> None:
        if self.fast_recovery:
            blade_on_failure(self.state, self.params)

    def mar_sample(self):
        return self.last_mar


@dataclass(frozen=True)
class EdcaAcParams:
    ac: str
    cw_min: int
    cw_max: int


# BK as printed in the EDCA table (7, 1023); note BK normally has the larger cw_min.
EDCA_AC = {
    "BK": EdcaAcParams("BK", 7, 1023),
    "BE": EdcaAcParams("BE", 15, 1023),
    "VI": EdcaAcParams("VI", 7, 15),
    "VO": EdcaAcParams("VO", 1, 3),
}


def ieee_beb_on_event(cw: float, outcome: str, cw_min: float = 15, cw_max: float = 1023) -> float:
    """Binary exponential backoff. ``outcome`` is 'success', 'failure' or 'drop'."""
    if outcome == "failure":
        return min(2 * (cw + 1) - 1, cw_max)
    if outcome in ("success", "drop"):
        return cw_min
    raise ValueError(f"unknown outcome {outcome!r}")


class IeeeBebPolicy(ContentionPolicy):
    name = "ieee"

    def __init__(self, ac: str | EdcaAcParams = "BE"):
        self.ac = EDCA_AC[ac] if isinstance(ac, str) else ac
        self.cw = float(self.ac.cw_min)

    def current_cw(self):
        return self.cw

    def on_ack(self, delay_us=None):
        self.cw = ieee_beb_on_event(self.cw, "success", self.ac.cw_min, self.ac.cw_max)

    def on_failure(self):
        self.cw = ieee_beb_on_event(self.cw, "failure", self.ac.cw_min, self.ac.cw_max)

    def on_drop(self):
        self.cw = ieee_beb_on_event(self.cw, "drop", self.ac.cw_min, self.ac.cw_max)


# idle-slot targeting ------------------------------------------------------

def optimal_idle_target(n: int, eta: float) -> float:
    """Mean idle slots between transmission events at the throughput-optimal attempt rate.

    Grid search over the per-slot attempt probability of ``n`` identical
    stations, minimising idle + collision overhead per success.
    """
    tau = np.linspace(1e-5, 0.5, 50000)
    p_idle = (1 - tau) ** n
    p_succ = n * tau * (1 - tau) ** (n - 1)
    cost = ((1 - p_idle - p_succ) * eta + p_idle) / p_succ
    t = tau[np.argmin(cost)]
    pi = (1 - t) ** n
    return float(pi / (1 - pi))


def idlesense_update(cw: float, mean_idle: float, target: float, *, deadband: float = 0.0,
                     alpha: float = 1.0666, epsilon: float = 6.0,
                     cw_min: float = 15, cw_max: float = 1023) -> float:
    """One AIMD step: too few idle slots -> grow cw multiplicatively; too many -> shrink additively."""
    if mean_idle < target - deadband:
        cw = cw * alpha
    elif mean_idle > target + deadband:
        cw = cw - epsilon
    return min(max(cw, cw_min), cw_max)


class IdleSensePolicy(ContentionPolicy):
    name = "idlesense"

    def __init__(self, n_stations: int, eta: float, cw_min=15, cw_max=1023, window: int = 5,
                 deadband: float = 0.0, alpha: float = 1.0666, epsilon: float = 6.0):
        self.target = optimal_idle_target(max(n_stations, 1), eta)
        self.cw_min, self.cw_max = cw_min, cw_max
        self.window = window
        self.deadband, self.alpha, self.epsilon = deadband, alpha, epsilon
        self.cw = float(cw_min)
        self._idle = 0
        self._tx = 0

    def current_cw(self):
        return self.cw

    def observe(self, state, amount):
        if state is ChannelState.IDLE:
            self._idle += amount
            return
        self._tx += amount
        if self._tx >= self.window:
            mean_idle = self._idle / self._tx
            self.cw = idlesense_update(self.cw, mean_idle, self.target, deadband=self.deadband,
                                       alpha=self.alpha, epsilon=self.epsilon,
                                       cw_min=self.cw_min, cw_max=self.cw_max)
            self._idle = self._tx = 0


def dda_update(cap: float, recent_delays, delta_us: float, *, dec: float = 0.5, inc: float = 16.0,
               cw_min: float = 15, cw_max: float = 1023) -> float:
    """Adjust the delay-driven window cap from recent backoff delays.

    Worst recent delay above ``delta_us`` halves the cap; below half of it the
    cap grows back towards ``cw_max``.
    """
    if not recent_delays:
        return cap
    worst = max(recent_delays)
    if worst > delta_us:
        cap = cap * dec
    elif worst < delta_us / 2:
        cap = cap + inc
    return min(max(cap, cw_min), cw_max)


class DdaPolicy(ContentionPolicy):
    """Delay-bounded window: ``min(efficiency window, delay cap)``.

    The efficiency window follows the idle-slot AIMD towards the
    throughput-optimal idle count for collision overhead ``eta`` (no station
    count needed); the cap shrinks whenever recent backoff delays exceed
    ``delta_us``.
    """

    name = "dda"

    def __init__(self, eta: float, delta_us: float = 5000.0, cw_min=15, cw_max=1023,
                 history: int = 10, window: int = 5):
        self.delta_us = delta_us
        self.cw_min, self.cw_max = cw_min, cw_max
        self.eff = IdleSensePolicy(1, eta, cw_min, cw_max, window)
        # without a station count the idle target is the single-domain optimum sqrt(eta)
        self.eff.target = math.sqrt(eta)
        self.cap = float(cw_max)
        self.delays: deque = deque(maxlen=history)

    def current_cw(self):
        return min(self.eff.cw, self.cap)

    def observe(self, state, amount):
        self.eff.observe(state, amount)

    def on_ack(self, delay_us=None):
        if delay_us is not None:
            self.delays.append(delay_us)
        self.cap = dda_update(self.cap, self.delays, self.delta_us, cw_min=self.cw_min, cw_max=self.cw_max)


def make_policy(spec: dict, *, n_stations: int, eta: float) -> ContentionPolicy:
    """Build a policy from a scenario mapping such as ``{"kind": "blade", "mar_tar": 0.25}``."""
    spec = dict(spec)
    kind = spec.pop("kind", "blade").lower()
    if kind in ("blade", "blade_sc"):
        fast = spec.pop("fast_recovery", kind == "blade")
        initial = spec.pop("initial_cw", None)
        if spec.pop("m_inc_half_range", False):
            params = BladeParams.half_range_m_inc(**spec)
        else:
            params = BladeParams(**spec)
        return BladePolicy(params, fast_recovery=fast, initial_cw=initial)
    if kind in ("ieee", "beb", "edca"):
        ac = spec.pop("ac", "BE")
        if ac not in EDCA_AC:
            raise ValueError(f"unknown access category {ac!r}")
        base = EDCA_AC[ac]
        params = EdcaAcParams(ac, spec.pop("cw_min", base.cw_min), spec.pop("cw_max", base.cw_max))
        if spec:
            raise ValueError(f"unknown ieee policy field(s): {', '.join(sorted(spec))}")
        return IeeeBebPolicy(params)
    if kind == "idlesense":
        n = spec.pop("n", n_stations)
        return IdleSensePolicy(n, spec.pop("eta", eta), **spec)
    if kind == "dda":
        return DdaPolicy(spec.pop("eta", eta), **spec)
    raise ValueError(f"unknown policy kind {kind!r}")
