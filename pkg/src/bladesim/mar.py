"""Microscopic access rate (MAR) observer."""
from __future__ import annotations

from dataclasses import dataclass


class InsufficientSamples(Exception):
    """Raised when fewer than ``n_obs`` events have been observed."""


@dataclass
class MarObserver:
    """Counts transmission events and idle backoff slots seen on the channel.

    ``mar = n_tx / (n_tx + n_idle)``, available once ``n_tx + n_idle >= n_obs``.
    """

    n_obs: int = 300
    n_tx: int = 0
    n_idle: int = 0

    def record_idle(self, slots: int) -> None:
        if slots < 0:
            raise ValueError("idle slot count must be >= 0")
        self.n_idle += slots

    def record_tx(self, count: int = 1) -> None:
        # count=2 for a CTS whose RTS was not audible
        if count < 0:
            raise ValueError("tx count must be >= 0")
        self.n_tx += count

    @property
    def samples(self) -> int:
        return self.n_tx + self.n_idle

    def ready(self) -> bool:
        return self.samples >= self.n_obs

    def peek(self) -> float | None:
        total = self.samples
        return self.n_tx / total if total else None

    def reset(self) -> None:
        self.n_tx = 0
        self.n_idle = 0

    def compute_mar(self) -> float:
        total = self.samples
        if total < self.n_obs or total == 0:
            raise InsufficientSamples(f"{total} < n_obs={self.n_obs}")
        mar = self.n_tx / total
        self.reset()
        return mar
