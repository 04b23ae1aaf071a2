"""Event-ready link: attempt clock, heralding and dead time after each herald.

Link latencies are in microseconds, herald times in seconds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .emission import (
    KEY_WINDOW,
    EmissionTimeModel,
    WindowConfig,
    contaminated_fraction,
    two_photon_acceptance,
)
from .errors import DomainError, LinkTimeoutError

DEFAULT_MAX_ATTEMPTS = 10**12


@dataclass(frozen=True)
class LinkParams:
    attempt_rate_hz: float = 52_000.0
    duty_cycle: float = 0.5
    herald_efficiency: float = 0.49e-6
    two_way_latency_us: float = 7.0
    readout_delay_us_a: float = 25.55
    readout_delay_us_b: float = 16.7
    per_arm_detection_prob_a: Optional[float] = 5.98e-3
    per_arm_detection_prob_b: Optional[float] = 1.44e-3

    def __post_init__(self):
        for name in ("attempt_rate_hz", "herald_efficiency", "two_way_latency_us",
                     "readout_delay_us_a", "readout_delay_us_b"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise DomainError("duty_cycle must lie in (0, 1]")
        if self.herald_efficiency > 1.0:
            raise DomainError("herald_efficiency is a probability")
        for name in ("per_arm_detection_prob_a", "per_arm_detection_prob_b"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")

    @property
    def attempt_period_s(self) -> float:
        return 1.0 / (self.attempt_rate_hz * self.duty_cycle)

    @property
    def dead_time_s(self) -> float:
        """Wait after a herald: ready signal round trip plus the slower readout."""
        return (self.two_way_latency_us + max(self.readout_delay_us_a, self.readout_delay_us_b)) * 1e-6


@dataclass(frozen=True)
class HeraldEvent:
    attempt_index: int
    herald_time_s: float
    contaminated: bool


def expected_event_rate(p: LinkParams) -> float:
    """Heralds per second, ignoring the dead time after each herald."""
    return p.attempt_rate_hz * p.duty_cycle * p.herald_efficiency


def herald_probability(p: LinkParams, m: EmissionTimeModel, w: WindowConfig,
                       reference: WindowConfig = KEY_WINDOW) -> float:
    """Per-attempt herald probability for window ``w``.

    ``herald_efficiency`` is quoted for the ``reference`` window; other
    windows scale it by their two-photon acceptance.
    """
    scale = two_photon_acceptance(m, w) / two_photon_acceptance(m, reference)
    return min(1.0, p.herald_efficiency * scale)


def mean_inter_herald_time(p: LinkParams, m: EmissionTimeModel, w: WindowConfig = KEY_WINDOW,
                           reference: WindowConfig = KEY_WINDOW) -> float:
    prob = herald_probability(p, m, w, reference)
    if prob <= 0.0:
        return float("inf")
    return p.dead_time_s + p.attempt_period_s / prob


def run_link(p: LinkParams, m: EmissionTimeModel, w: WindowConfig, n_heralds: int, seed: int,
             reference: WindowConfig = KEY_WINDOW, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> List[HeraldEvent]:
    """Simulate ``n_heralds`` heralded events.

    Failed attempts are skipped in bulk: the number of attempts up to and
    including the next success is geometric. After a herald the next attempt
    waits for the dead time and then one attempt period.
    """
    if n_heralds < 1:
        raise DomainError("n_heralds must be at least 1")
    rng = np.random.default_rng(seed)
    prob = herald_probability(p, m, w, reference)
    bad = contaminated_fraction(m, w)
    period = p.attempt_period_s
    events = []
    attempt = 0
    next_attempt_time = 0.0
    for _ in range(n_heralds):
        if prob <= 0.0:
            raise LinkTimeoutError(f"no herald within {max_attempts} attempts (herald probability is zero)")
        k = int(rng.geometric(prob))
        if k > max_attempts:
            raise LinkTimeoutError(f"no herald within {max_attempts} attempts")
        attempt += k
        t = next_attempt_time + (k - 1) * period
        events.append(HeraldEvent(attempt_index=attempt - 1, herald_time_s=t, contaminated=bool(rng.random() < bad)))
        next_attempt_time = t + p.dead_time_s + period
    return events
