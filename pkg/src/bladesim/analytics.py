"""Closed-form contention models.

Saturated single-domain results used as independent oracles for the
simulator: attempt probability, steady-state access rate, the throughput
cost function and its optimum, the binary-exponential-backoff collision
fixed point and the observation-window concentration bound.

Two attempt-probability conventions coexist on purpose:

* ``attempt_probability(cw) = 2 / (cw + 1)`` (per transmission chance,
  backoff uniform on ``[0, cw]``) is used by the steady-state and cost
  functions.
* ``mar_exceeds_collision`` takes ``omega = cw + 1`` and uses
  ``tau = 2 / omega``.
"""
from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np


@dataclass(frozen=True)
class BebModel:
    """Saturated BEB population: ``n`` stations, window ladder ``cw_min * 2**i`` for ``i <= r``."""

    n: int
    cw_min: float = 15
    r: int = 6

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("BebModel needs n >= 2")
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.cw_min < 2:
            raise ValueError("cw_min must be >= 2 so that 2/cw_min <= 1")


@dataclass(frozen=True)
class CostParams:
    n: int
    eta: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("CostParams needs n >= 2")
        if self.eta <= 1:
            raise ValueError("eta must be > 1")


def attempt_probability(cw: float) -> float:
    if cw < 1:
        raise ValueError(f"cw must be >= 1, got {cw}")
    return 2.0 / (cw + 1.0)


def steady_mar(n: int, cw: float) -> float:
    """Exact stationary access rate ``1 - (1 - tau)**n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tau = attempt_probability(cw)
    return 1.0 - (1.0 - tau) ** n


def steady_mar_approx(n: int, cw: float) -> float:
    """First-order form ``2n / (cw + 1)``, valid for small attempt probability."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if cw < 1:
        raise ValueError(f"cw must be >= 1, got {cw}")
    return 2.0 * n / (cw + 1.0)


def converged_cw(n: int, mar: float, exact: bool = False) -> float:
    """Contention window at which ``n`` identical stations produce access rate ``mar``.

    The default inverts the first-order relation (``2n/mar - 1``); ``exact=True``
    inverts ``1 - (1 - tau)**n`` instead.
    """
    if not 0 < mar < 1:
        raise ValueError("mar must lie in (0, 1)")
    if exact:
        tau = 1.0 - (1.0 - mar) ** (1.0 / n)
        return 2.0 / tau - 1.0
    return 2.0 * n / mar - 1.0


def cost_function(mar, n: int, eta: float):
    """Throughput cost ``L(mar)``; smaller is better. Vectorised over ``mar``.

    ``L = (n - mar)/n * ((eta - 1) mar + 1) / (mar (1 - mar))``
    """
    m = np.asarray(mar, dtype=float)
    if np.any((m <= 0) | (m >= 1)):
        raise ValueError("cost_function is defined on the open interval (0, 1)")
    out = (n - m) / n * ((eta - 1.0) * m + 1.0) / (m * (1.0 - m))
    return float(out) if out.ndim == 0 else out


def optimal_mar(eta: float) -> float:
    if eta <= 0:
        raise ValueError("eta must be > 0")
    return 1.0 / (math.sqrt(eta) + 1.0)


def grid_argmin_mar(n: int, eta: float, step: float = 1e-4) -> float:
    """Brute-force argmin of ``cost_function`` over ``step, 2*step, ..., 1 - step``."""
    grid = np.arange(1, int(round(1.0 / step))) * step
    return float(grid[np.argmin(cost_function(grid, n, eta))])


def _beb_tau(rho: float, cw_min: float, r: int) -> float:
    powers = rho ** np.arange(r + 1)
    p_stage = powers / powers.sum()
    return float(np.sum(2.0 * p_stage / (cw_min * 2.0 ** np.arange(r + 1))))


def beb_residual(rho: float, n: int, cw_min: float = 15, r: int = 6) -> float:
    """``rho - (1 - (1 - tau(rho))**(n-1))``; negative at 0, positive at 1."""
    tau = _beb_tau(rho, cw_min, r)
    return rho - (1.0 - (1.0 - tau) ** (n - 1))


def beb_collision_fixed_point(n: int, cw_min: float = 15, r: int = 6,
                              tol: float = 1e-9, max_iter: int = 200) -> float:
    """Collision probability of ``n`` saturated BEB stations, solved by bisection on (0, 1)."""
    BebModel(n, cw_min, r)
    lo, hi = 0.0, 1.0
    f_lo = beb_residual(lo, n, cw_min, r)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = beb_residual(mid, n, cw_min, r)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def beb_collision_fixed_point_time_weighted(n: int, cw_min: float = 15, r: int = 6,
                                            tol: float = 1e-9, max_iter: int = 200) -> float:
    """Same fixed point with stages weighted by the slots spent in them.

    Stage ``i`` uses window ``(cw_min + 1) * 2**i - 1`` and its attempts are
    ``rho**i``-weighted, so ``tau = sum(rho**i) / sum(rho**i * (W_i + 1) / 2)``
    (attempts per backoff slot). This is the saturated-DCF renewal form.
    """
    BebModel(n, cw_min, r)
    k = np.arange(r + 1)
    w = (cw_min + 1.0) * 2.0 ** k

    def resid(rho):
        p = rho ** k
        tau = p.sum() / (p * w / 2.0).sum()
        return rho - (1.0 - (1.0 - tau) ** (n - 1))

    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if resid(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def standard_error(n_obs: int, p: float) -> float:
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return math.sqrt(p * (1.0 - p) / n_obs)


def chernoff_bound(n_obs: int, p: float, delta: float) -> float:
    """Two-sided bound on ``P(|mean - p| >= delta)`` for ``n_obs`` Bernoulli(p) samples.

    ``2 exp(-n_obs delta^2 / (3 p (1 - p)))``. Not clipped to 1, so ``delta = 0`` gives 2.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return 2.0 * math.exp(-n_obs * delta * delta / (3.0 * p * (1.0 - p)))


def mar_exceeds_collision(n: int, omega: float) -> tuple[float, float]:
    """Return ``(mar, rho)`` for ``n`` stations with ``tau = 2/omega`` (``omega = cw + 1``).

    For ``n >= 2`` and ``0 < tau < 1`` the access rate strictly exceeds the
    per-attempt collision probability; with ``n == 1`` ``rho`` is 0.
    """
    tau = 2.0 / omega
    if not 0 < tau < 1:
        raise ValueError("need 0 < 2/omega < 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    mar = 1.0 - (1.0 - tau) ** n
    rho = 1.0 - (1.0 - tau) ** (n - 1)
    # mar - rho = tau (1 - tau)**(n - 1) > 0; both round to 1.0 when that underflows
    if n >= 2:
        assert mar > rho or (1.0 - tau) ** (n - 1) < 1e-15
    return mar, rho


# table emitters ---------------------------------------------------------

def collision_table(n_values: Iterable[int], cw_min: float = 15, r: int = 6) -> list[dict]:
    rows = []
    for n in n_values:
        rho = beb_collision_fixed_point(n, cw_min, r)
        rows.append({"n": n, "cw_min": cw_min, "r": r, "rho": rho})
    return rows


def cost_table(n: int, etas: Sequence[float], mars: Sequence[float]) -> list[dict]:
    rows = []
    for eta in etas:
        for m in mars:
            rows.append({"n": n, "eta": eta, "mar": m, "cost": cost_function(m, n, eta),
                         "mar_opt": optimal_mar(eta)})
    return rows


def write_table(rows: list[dict], out: TextIO | None = None, delimiter: str = ",") -> None:
    out = out or sys.stdout
    if not rows:
        return
    w = csv.DictWriter(out, fieldnames=list(rows[0]), delimiter=delimiter, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
