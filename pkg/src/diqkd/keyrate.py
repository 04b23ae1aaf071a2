"""Secret-key-rate functions.

``dw_chsh_rate`` is the standard one-key-setting CHSH bound. The robust
two-key-setting protocol has no closed form here; ``robust_anchor_check``
interpolates a handful of reference operating points instead and says so in
its output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NoPositiveKeyError, NoViolationError, SupraQuantumError

TSIRELSON = 2.0 * math.sqrt(2.0)

# Penalty constant of the finite-key heuristic; see calibrate_penalty_constant().
DEFAULT_PENALTY_C = 11.8012
DEFAULT_F_EC = 1.15

ANCHOR_LABEL = "paper-anchored model, not a security bound"
ANCHOR_POINT = (2.578, 0.0779, 0.07)
ROBUST_CRITICAL_S = 2.362
ROBUST_CRITICAL_Q = 0.082
ORIGINAL_CRITICAL_Q = 0.071


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class KeyRateResult:
    rate: float
    h_q: float
    chi_s: float
    clamped: bool

    @property
    def raw_rate(self) -> float:
        return 1.0 - self.h_q - self.chi_s


def dw_chsh_rate(s: float, q: float) -> KeyRateResult:
    """``1 - h(Q) - h((1 + sqrt((S/2)^2 - 1)) / 2)``, clamped at zero."""
    if s <= 2.0:
        raise NoViolationError(f"S={s} does not violate the CHSH inequality")
    if s > TSIRELSON + 1e-9:
        raise SupraQuantumError(f"S={s} exceeds the Tsirelson bound")
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"QBER must lie in [0, 0.5], got {q}")
    s = min(s, TSIRELSON)
    chi = binary_entropy((1.0 + math.sqrt((s / 2.0) ** 2 - 1.0)) / 2.0)
    h_q = binary_entropy(q)
    raw = 1.0 - h_q - chi
    return KeyRateResult(rate=max(raw, 0.0), h_q=h_q, chi_s=chi, clamped=raw < 0.0)


def asymptotic_rate(s: float, q: float) -> float:
    """``dw_chsh_rate`` as a plain number, zero where no key is possible."""
    if s <= 2.0 or q >= 0.5:
        return 0.0
    return dw_chsh_rate(min(s, TSIRELSON), max(q, 0.0)).rate


def depolarizing_relation(v: float):
    """(S, Q) of a Werner state with visibility ``v``."""
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {v}")
    return TSIRELSON * v, (1.0 - v) / 2.0


def depolarizing_threshold() -> float:
    """Visibility at which the raw DW rate changes sign on the depolarizing line."""
    from scipy.optimize import brentq

    def raw(v):
        s, q = depolarizing_relation(v)
        return dw_chsh_rate(s, q).raw_rate

    return brentq(raw, 1.0 / math.sqrt(2.0) + 1e-9, 1.0, xtol=1e-12)


@dataclass(frozen=True)
class AnchorReport:
    s_value: float
    q_avg: float
    modeled_rate: float
    positive: bool
    original_protocol_positive: bool
    label: str = ANCHOR_LABEL


def _interp(x, xs, ys):
    # piecewise linear, extrapolating with the end segments
    if x <= xs[0]:
        i = 0
    elif x >= xs[-1]:
        i = len(xs) - 2
    else:
        i = max(k for k in range(len(xs) - 1) if xs[k] <= x)
    x0, x1, y0, y1 = xs[i], xs[i + 1], ys[i], ys[i + 1]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def robust_anchor_check(s: float, q: float) -> AnchorReport:
    """Place (S, Q) relative to the reference operating points of the robust protocol.

    The modeled rate is the smaller of two piecewise-linear curves: one in Q
    through (0, 1), (0.0779, 0.07), (0.082, 0), and one in S through
    (2.362, 0), (2.578, 0.07), (2*sqrt(2), 1).
    """
    s0, q0, r0 = ANCHOR_POINT
    rate_q = _interp(q, [0.0, q0, ROBUST_CRITICAL_Q], [1.0, r0, 0.0])
    rate_s = _interp(s, [ROBUST_CRITICAL_S, s0, TSIRELSON], [0.0, r0, 1.0])
    modeled = min(rate_q, rate_s, 1.0)
    return AnchorReport(
        s_value=s,
        q_avg=q,
        modeled_rate=modeled,
        positive=modeled > 0.0,
        original_protocol_positive=s > 2.0 and q < ORIGINAL_CRITICAL_Q,
    )


@dataclass(frozen=True)
class FiniteKeyQuery:
    s_value: float
    q_avg: float
    eps_di: float = 1e-5
    f_ec: float = DEFAULT_F_EC

    def __post_init__(self):
        if not 0.0 < self.eps_di < 1.0:
            raise DomainError("eps_di must lie in (0, 1)")
        if self.f_ec < 1.0:
            raise DomainError("f_ec must be at least 1")


def _effective_rate(q: FiniteKeyQuery, rate_fn) -> float:
    r = rate_fn(q.s_value, q.q_avg)
    if r <= 0.0:
        raise NoPositiveKeyError(f"asymptotic rate {r} is not positive at S={q.s_value}, Q={q.q_avg}")
    r_eff = r - (q.f_ec - 1.0) * binary_entropy(q.q_avg)
    if r_eff <= 0.0:
        raise NoPositiveKeyError("error-correction overhead exceeds the asymptotic rate")
    return r_eff


def finite_key_length(n: int, q: FiniteKeyQuery, rate_fn=asymptotic_rate, c: float = DEFAULT_PENALTY_C) -> float:
    """Heuristic extractable key bits after ``n`` rounds (may be negative)."""
    r_eff = _effective_rate(q, rate_fn)
    return n * (r_eff - c * math.sqrt(math.log(2.0 / q.eps_di) / n))


def heuristic_min_block_length(q: FiniteKeyQuery, rate_fn=asymptotic_rate, c: float = DEFAULT_PENALTY_C) -> int:
    """Smallest round count whose heuristic finite key holds at least one bit.

    The penalty ``c * sqrt(ln(2/eps) / n)`` is a shape-only stand-in for a
    real finite-key analysis.
    """
    r_eff = _effective_rate(q, rate_fn)
    log_term = math.log(2.0 / q.eps_di)

    def enough(n):
        return n * r_eff - c * math.sqrt(n * log_term) >= 1.0

    hi = 1
    while not enough(hi):
        hi *= 2
    lo = hi // 2
    # invariant: enough(hi) and not enough(lo) (lo == 0 counts as not enough)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if enough(mid):
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_penalty_constant(target_n: float = 1.75e5, s: float = 2.578, q: float = 0.0779,
                               eps_di: float = 1e-5, f_ec: float = DEFAULT_F_EC, rate_fn=asymptotic_rate) -> float:
    """Penalty constant for which the heuristic needs exactly ``target_n`` rounds."""
    r_eff = _effective_rate(FiniteKeyQuery(s, q, eps_di, f_ec), rate_fn)
    return (target_n * r_eff - 1.0) / math.sqrt(target_n * math.log(2.0 / eps_di))
