"""Beta posteriors for the CHSH winning probability and the QBERs.

Includes the regularized incomplete beta function and its inverse (written
here rather than imported so the worst-case bounds have no hidden numerics),
plus the sinusoidal visibility fit of the correlation curves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError, NumericError
from .protocol import CHSH_CELLS, CorrelationTable, estimate_bell

CF_TOL = 1e-15
CF_MAX_ITER = 10_000
INV_TOL = 1e-12
INV_MAX_ITER = 200
_TINY = 1e-300


@dataclass(frozen=True)
class BetaPosterior:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"Beta shapes must be positive, got ({self.a}, {self.b})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def cdf(self, x: float) -> float:
        return reg_inc_beta(self.a, self.b, x)

    def ppf(self, p: float) -> float:
        return beta_inv_cdf(self.a, self.b, p)


@dataclass(frozen=True)
class WorstCaseBounds:
    s_min: float
    q0_max: float
    q1_max: float
    tail: float = 0.03
    win_count: int = 0
    n_chsh: int = 0

    @property
    def q_max(self) -> float:
        """Joint QBER bound, the larger of the two key settings."""
        return max(self.q0_max, self.q1_max)


def _log_front(a, b, x):
    # log of x^a (1-x)^b / B(a, b)
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + a * math.log(x) + b * math.log1p(-x))


def _beta_cf(a, b, x):
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if not (a > 0 and b > 0):
        raise DomainError(f"shape parameters must be positive, got ({a}, {b})")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(_log_front(a, b, x))
    # the fraction converges fast below the mean; use symmetry above it
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def beta_pdf(a: float, b: float, x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x)
                    + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))


def beta_inv_cdf(a: float, b: float, p: float) -> float:
    """Quantile of Beta(a, b): Newton steps inside a shrinking bisection bracket."""
    if not (a > 0 and b > 0):
        raise DomainError(f"shape parameters must be positive, got ({a}, {b})")
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    lo, hi = 0.0, 1.0
    x = a / (a + b)
    for _ in range(INV_MAX_ITER):
        f = reg_inc_beta(a, b, x) - p
        if abs(f) <= INV_TOL:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        dens = beta_pdf(a, b, x)
        step = x - f / dens if dens > 0 else None
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        if hi - lo < 1e-16:
            return step
        x = step
    raise NumericError(f"Beta quantile did not converge for a={a}, b={b}, p={p}")


def posterior_from_counts(successes: int, total: int) -> BetaPosterior:
    """Posterior under a uniform prior: ``Beta(s + 1, n - s + 1)``."""
    if not 0 <= successes <= total:
        raise DomainError(f"need 0 <= successes <= total, got {successes}/{total}")
    return BetaPosterior(successes + 1, total - successes + 1)


def chsh_win_count(t: CorrelationTable, method: str = "paper_floor") -> int:
    """Number of CHSH game wins among the CHSH-setting rounds.

    ``paper_floor`` converts the aggregate S through ``P_win = (S + 4) / 8``
    and floors; ``direct`` counts the winning outputs cell by cell. The two
    differ slightly when the cells have unequal sizes.
    """
    n_chsh = sum(int(t.n[c]) for c in CHSH_CELLS)
    if method == "paper_floor":
        s = estimate_bell(t).s_value
        return int(math.floor(n_chsh * (s + 4.0) / 8.0))
    if method == "direct":
        estimate_bell(t)  # raises on empty cells
        diff = t.n_diff
        return int(t.n_same[2, 1] + diff[2, 0] + diff[3, 0] + diff[3, 1])
    raise DomainError(f"unknown win-count method {method!r}")


def worst_case_bounds(t: CorrelationTable, tail: float = 0.03, method: str = "paper_floor") -> WorstCaseBounds:
    """CHSH lower bound and QBER upper bounds at the given posterior tail mass."""
    if not 0.0 < tail < 0.5:
        raise DomainError(f"tail must lie in (0, 0.5), got {tail}")
    n_chsh = sum(int(t.n[c]) for c in CHSH_CELLS)
    wins = chsh_win_count(t, method)
    win_post = posterior_from_counts(wins, n_chsh)
    q0_post = posterior_from_counts(int(t.n_same[0, 0]), int(t.n[0, 0]))
    q1_post = posterior_from_counts(int(t.n_same[1, 1]), int(t.n[1, 1]))
    return WorstCaseBounds(
        s_min=8.0 * win_post.ppf(tail) - 4.0,
        q0_max=q0_post.ppf(1.0 - tail),
        q1_max=q1_post.ppf(1.0 - tail),
        tail=tail,
        win_count=wins,
        n_chsh=n_chsh,
    )


def fit_visibility(e_values: Sequence[float], delta_deg: Sequence[float]) -> float:
    """Least-squares amplitude of ``E = -V cos(2 delta)``."""
    if len(e_values) != len(delta_deg):
        raise DomainError("correlator and angle lists differ in length")
    if len(e_values) < 2:
        raise DomainError("need at least two points to fit a visibility")
    c = [math.cos(2.0 * math.radians(d)) for d in delta_deg]
    denom = sum(ci * ci for ci in c)
    if denom < 1e-15:
        raise DomainError("all angle differences sit at cos(2 delta) = 0; the fit is degenerate")
    return -sum(e * ci for e, ci in zip(e_values, c)) / denom


def table_row_visibility(t: CorrelationTable, y: int, alpha_deg=(-22.5, 22.5, -45.0, 0.0),
                         beta_deg=(-22.5, 22.5)) -> float:
    """Visibility fit over all four of Alice's settings for Bob's input ``y``."""
    e, d = [], []
    for x in range(4):
        n = int(t.n[x, y])
        if n == 0:
            continue
        e.append((2 * int(t.n_same[x, y]) - n) / n)
        d.append(alpha_deg[x] - beta_deg[y])
    return fit_visibility(e, d)
