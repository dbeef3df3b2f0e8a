"""Intermittent, bandwidth-limited channel between cloud planner and vehicle.

The cloud is reachable only inside surfacing windows ``[k*period,
k*period + window_length)``.  Each window has a byte budget; a delivered
payload becomes visible to the receiver ``latency`` seconds after sending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LinkConfig:
    surfacing_period: float = 300.0  # [s]; math.inf means a single window at t=0
    window_length: float = 20.0  # [s]
    byte_budget_per_window: int = 2048
    latency: float = 1.0  # [s]
    drop_probability: float = 0.0

    def __post_init__(self):
        if not self.surfacing_period > self.window_length >= 0:
            raise ValueError("need surfacing_period > window_length >= 0")
        if self.byte_budget_per_window < 0 or self.latency < 0:
            raise ValueError("budget and latency must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must lie in [0, 1]")

    def window_index(self, t: float) -> int | None:
        """Index of the surfacing window containing t, or None mid-dive."""
        if t < 0:
            return None
        k = 0 if math.isinf(self.surfacing_period) else int(t // self.surfacing_period)
        start = k * self.surfacing_period if k else 0.0
        return k if t - start < self.window_length else None


@dataclass(frozen=True)
class Message:
    payload: bytes
    sent_at: float
    arrives_at: float
    window: int


@dataclass
class LinkState:
    config: LinkConfig
    rng: np.random.Generator
    used: dict[int, int] = field(default_factory=dict)
    in_flight: list[Message] = field(default_factory=list)
    attempts: int = 0
    delivered: int = 0

    def remaining(self, t: float) -> int:
        k = self.config.window_index(t)
        if k is None:
            return 0
        return self.config.byte_budget_per_window - self.used.get(k, 0)

    def receive(self, t: float) -> list[Message]:
        """Pop every message whose arrival time is <= t, in send order."""
        ready = [m for m in self.in_flight if m.arrives_at <= t]
        self.in_flight = [m for m in self.in_flight if m.arrives_at > t]
        return ready


def try_send(link: LinkState, payload: bytes, t: float) -> bool:
    """Attempt delivery of ``payload`` at time t.

    A drop draw is consumed on every attempt, whether or not the window and
    budget checks pass, so the stream position depends only on call count.
    """
    cfg = link.config
    link.attempts += 1
    dropped = bool(link.rng.random() < cfg.drop_probability)
    k = cfg.window_index(t)
    if k is None or dropped:
        return False
    used = link.used.get(k, 0)
    if used + len(payload) > cfg.byte_budget_per_window:
        return False
    link.used[k] = used + len(payload)
    link.in_flight.append(Message(bytes(payload), t, t + cfg.latency, k))
    link.delivered += 1
    return True


def next_window_start(config: LinkConfig, t: float) -> float:
    """Earliest time >= t at which the cloud is reachable (inf if never)."""
    if config.window_index(t) is not None:
        return t
    if math.isinf(config.surfacing_period):
        return math.inf
    return (t // config.surfacing_period + 1) * config.surfacing_period
