"""Protocol rounds, the append-only event ledger and Bell/QBER estimation.

Alice has four inputs (two key settings, two CHSH settings), Bob has two.
The key is read from rounds with ``x == y``; outputs there should be
anti-correlated, so ``a == b`` counts as an error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AbortedRunError, DomainError, InsufficientDataError
from .link import HeraldEvent
from .quantum import (
    DEFAULT_CONVENTION,
    MeasurementConvention,
    ReadoutSetting,
    TwoQubitState,
    joint_outcome_probs,
    wrap_angle_deg,
    werner,
)

CHSH_CELLS = ((2, 0), (3, 0), (2, 1), (3, 1))
KEY_CELLS = ((0, 0), (1, 1))
# sign of each correlator in S = E21 - E20 - E30 - E31
CHSH_SIGNS = {(2, 1): 1, (2, 0): -1, (3, 0): -1, (3, 1): -1}


@dataclass(frozen=True)
class SettingsMap:
    alpha_deg: Tuple[float, float, float, float] = (-22.5, 22.5, -45.0, 0.0)
    beta_deg: Tuple[float, float] = (-22.5, 22.5)

    def __post_init__(self):
        if len(self.alpha_deg) != 4 or len(self.beta_deg) != 2:
            raise DomainError("settings map needs 4 angles for Alice and 2 for Bob")


@dataclass(frozen=True)
class EventRecord:
    round_id: int
    herald_time_ns: int
    x: int
    y: int
    a: int
    b: int

    def __post_init__(self):
        if self.x not in (0, 1, 2, 3) or self.y not in (0, 1):
            raise DomainError(f"inputs out of range in round {self.round_id}")
        if self.a not in (0, 1) or self.b not in (0, 1):
            raise DomainError(f"outputs out of range in round {self.round_id}")


class EventLedger:
    """Append-only sequence of rounds with strictly increasing ids."""

    def __init__(self, records: Sequence[EventRecord] = ()):
        self._records: List[EventRecord] = []
        for r in records:
            self.append(r)

    def append(self, record: EventRecord) -> None:
        if self._records and record.round_id <= self._records[-1].round_id:
            raise DomainError(
                f"round_id {record.round_id} does not follow {self._records[-1].round_id}")
        self._records.append(record)

    @property
    def records(self) -> Tuple[EventRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self._records)

    def __getitem__(self, i):
        return self._records[i]

    def __eq__(self, other):
        return isinstance(other, EventLedger) and self._records == other._records


@dataclass(frozen=True)
class CorrelationTable:
    """Round counts ``n[x][y]`` and equal-output counts ``n_same[x][y]``."""

    n: np.ndarray
    n_same: np.ndarray

    def __post_init__(self):
        n = np.array(self.n, dtype=np.int64)
        same = np.array(self.n_same, dtype=np.int64)
        if n.shape != (4, 2) or same.shape != (4, 2):
            raise DomainError("correlation table must be indexed [x in 0..3][y in 0..1]")
        if (same < 0).any() or (same > n).any():
            raise DomainError("need 0 <= n_same <= n in every cell")
        n.setflags(write=False)
        same.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "n_same", same)

    @classmethod
    def zeros(cls) -> "CorrelationTable":
        return cls(np.zeros((4, 2), dtype=np.int64), np.zeros((4, 2), dtype=np.int64))

    @property
    def n_diff(self) -> np.ndarray:
        return self.n - self.n_same

    @property
    def total(self) -> int:
        return int(self.n.sum())

    def __eq__(self, other):
        return (isinstance(other, CorrelationTable)
                and np.array_equal(self.n, other.n) and np.array_equal(self.n_same, other.n_same))

    def scaled(self, k: int) -> "CorrelationTable":
        return CorrelationTable(self.n * k, self.n_same * k)


@dataclass(frozen=True)
class BellEstimate:
    e: dict
    sigma_e: dict
    s_value: float
    sigma_s: float
    q0: float
    q1: float
    q_avg: float
    sigma_q0: float
    sigma_q1: float
    sigma_q: float
    q_mean_unpooled: float


@dataclass(frozen=True)
class SiftedKey:
    key_a: str
    key_b: str
    mismatch_rate: Optional[float]

    def __len__(self):
        return len(self.key_a)


# Sampler: (alpha_deg, beta_deg, rng) -> (a, b)
Sampler = Callable[[float, float, np.random.Generator], Tuple[int, int]]


class BornRuleSampler:
    """Draws joint outputs from a fixed two-qubit state."""

    def __init__(self, state: TwoQubitState, conv: MeasurementConvention = DEFAULT_CONVENTION):
        self.state = state
        self.conv = conv
        self._cache = {}

    def cumulative(self, alpha_deg, beta_deg):
        key = (alpha_deg, beta_deg)
        if key not in self._cache:
            d = joint_outcome_probs(self.state, ReadoutSetting(wrap_angle_deg(alpha_deg)),
                                    ReadoutSetting(wrap_angle_deg(beta_deg)), self.conv)
            # order: (0,0), (0,1), (1,0), (1,1)
            self._cache[key] = np.cumsum(d.p.ravel())
        return self._cache[key]

    def __call__(self, alpha_deg, beta_deg, rng):
        k = int(np.searchsorted(self.cumulative(alpha_deg, beta_deg), rng.random(), side="right"))
        k = min(k, 3)
        return k >> 1, k & 1


class HeraldedSampler:
    """Per-round state chosen by the herald stream: white noise if contaminated."""

    def __init__(self, heralds: Sequence[HeraldEvent], v_max: float,
                 conv: MeasurementConvention = DEFAULT_CONVENTION):
        self._heralds = list(heralds)
        self._next = 0
        self._good = BornRuleSampler(werner(v_max), conv)
        self._bad = BornRuleSampler(werner(0.0), conv)

    def __call__(self, alpha_deg, beta_deg, rng):
        if self._next >= len(self._heralds):
            raise DomainError("herald stream exhausted")
        herald = self._heralds[self._next]
        self._next += 1
        sampler = self._bad if herald.contaminated else self._good
        return sampler(alpha_deg, beta_deg, rng)


def run_protocol(n_rounds: int, sampler: Sampler, settings: SettingsMap = SettingsMap(), seed: int = 0,
                 herald_times_ns: Optional[Sequence[int]] = None) -> EventLedger:
    """Run ``n_rounds`` rounds and return their ledger.

    Alice's input comes from two random bits and Bob's from one, each from
    its own stream spawned off ``seed``; the device gets a third stream.
    """
    if n_rounds < 1:
        raise DomainError("n_rounds must be at least 1")
    if herald_times_ns is not None and len(herald_times_ns) < n_rounds:
        raise DomainError("fewer herald times than rounds")
    alice_ss, bob_ss, device_ss = np.random.SeedSequence(seed).spawn(3)
    alice_bits = np.random.default_rng(alice_ss).integers(0, 2, size=(n_rounds, 2))
    bob_bits = np.random.default_rng(bob_ss).integers(0, 2, size=n_rounds)
    device_rng = np.random.default_rng(device_ss)
    ledger = EventLedger()
    for i in range(n_rounds):
        x = int(2 * alice_bits[i, 0] + alice_bits[i, 1])
        y = int(bob_bits[i])
        try:
            a, b = sampler(settings.alpha_deg[x], settings.beta_deg[y], device_rng)
        except Exception as exc:
            raise AbortedRunError(f"sampler failed in round {i}: {exc}", ledger) from exc
        t = 0 if herald_times_ns is None else int(herald_times_ns[i])
        ledger.append(EventRecord(i, t, x, y, int(a), int(b)))
    return ledger


def tabulate(ledger) -> CorrelationTable:
    n = np.zeros((4, 2), dtype=np.int64)
    same = np.zeros((4, 2), dtype=np.int64)
    for r in ledger:
        n[r.x, r.y] += 1
        if r.a == r.b:
            same[r.x, r.y] += 1
    return CorrelationTable(n, same)


def _binomial_sigma(p, n):
    return math.sqrt(p * (1.0 - p) / n)


def estimate_bell(t: CorrelationTable) -> BellEstimate:
    for cell in CHSH_CELLS + KEY_CELLS:
        if t.n[cell] == 0:
            raise InsufficientDataError(cell)
    e, sigma_e = {}, {}
    for cell in CHSH_CELLS:
        n = int(t.n[cell])
        same = int(t.n_same[cell])
        e[cell] = (same - (n - same)) / n
        sigma_e[cell] = math.sqrt((1.0 - e[cell] ** 2) / n)
    s = sum(CHSH_SIGNS[c] * e[c] for c in CHSH_CELLS)
    sigma_s = math.sqrt(sum(v * v for v in sigma_e.values()))
    n00, n11 = int(t.n[0, 0]), int(t.n[1, 1])
    q0 = int(t.n_same[0, 0]) / n00
    q1 = int(t.n_same[1, 1]) / n11
    q = (int(t.n_same[0, 0]) + int(t.n_same[1, 1])) / (n00 + n11)
    return BellEstimate(
        e=e,
        sigma_e=sigma_e,
        s_value=s,
        sigma_s=sigma_s,
        q0=q0,
        q1=q1,
        q_avg=q,
        sigma_q0=_binomial_sigma(q0, n00),
        sigma_q1=_binomial_sigma(q1, n11),
        sigma_q=_binomial_sigma(q, n00 + n11),
        q_mean_unpooled=0.5 * (q0 + q1),
    )


def sift(ledger) -> SiftedKey:
    kept = [r for r in ledger if r.x == r.y and r.x in (0, 1)]
    key_a = "".join(str(r.a) for r in kept)
    key_b = "".join(str(r.b) for r in kept)
    if not kept:
        return SiftedKey("", "", None)
    errors = sum(1 for r in kept if r.a == r.b)
    return SiftedKey(key_a, key_b, errors / len(kept))
