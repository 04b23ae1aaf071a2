"""Photon emission-time model and the acceptance-window trade-off.

A heralding photon is emitted at ``pulse + decay`` where the excitation pulse
is Gaussian and the decay exponential (an exponentially modified Gaussian).
A herald is contaminated when one of the two atoms went through a multi-photon
branch; accepted contaminated heralds carry no entanglement.

Two shapes are available for the detected photon of a contaminated atom:

``re_excited``
    a photon emitted while the excitation pulse is still on, so that the atom
    can be excited again. Its density is the single-photon density weighted by
    the remaining pulse fraction. This is the default; late window starts
    suppress it, which is what makes filtering worthwhile.
``double_second``
    the detected photon is the second emission after a re-excitation,
    i.e. the single density convolved once more with the decay.

All times are in nanoseconds.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Tuple

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import DomainError, NoPositiveKeyError, UndefinedWindowError
from .keyrate import asymptotic_rate

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
QUAD_TOL = 1e-9
KINDS = ("single", "double_second", "re_excited")

RateFn = Callable[[float, float], float]


@dataclass(frozen=True)
class EmissionTimeModel:
    """Emission-time and contamination parameters.

    Defaults are the output of :func:`calibrate_model` with ``v_max = 0.92``
    (see ``scripts/calibrate.py``).
    """

    pulse_fwhm_ns: float = 22.0
    pulse_center_ns: float = 739.7225755
    decay_tau_ns: float = 26.2
    double_emission_fraction: float = 0.1772084366
    v_max: float = 0.92
    q_floor: float = 0.03373032047
    bad_photon_kind: str = "re_excited"

    def __post_init__(self):
        if self.pulse_fwhm_ns <= 0 or self.decay_tau_ns <= 0:
            raise DomainError("pulse width and decay time must be positive")
        if not 0.0 <= self.double_emission_fraction < 1.0:
            raise DomainError("double_emission_fraction must lie in [0, 1)")
        if not 0.0 <= self.v_max <= 1.0:
            raise DomainError("v_max must lie in [0, 1]")
        if not 0.0 <= self.q_floor < 0.5:
            raise DomainError("q_floor must lie in [0, 0.5)")
        if self.bad_photon_kind not in ("double_second", "re_excited"):
            raise DomainError(f"unknown bad_photon_kind {self.bad_photon_kind!r}")

    @property
    def sigma_ns(self) -> float:
        return self.pulse_fwhm_ns * FWHM_TO_SIGMA

    @property
    def support_start_ns(self) -> float:
        return self.pulse_center_ns - 5.0 * self.pulse_fwhm_ns

    def support_end_ns(self, t_e_ns: float) -> float:
        return t_e_ns + 10.0 * self.decay_tau_ns


@dataclass(frozen=True)
class WindowConfig:
    t_s_ns: float
    t_e_ns: float = 850.0

    def __post_init__(self):
        if not self.t_s_ns < self.t_e_ns:
            raise DomainError(f"window start {self.t_s_ns} must precede end {self.t_e_ns}")


# 95 ns window ending at 850 ns, the window used for the key data.
KEY_WINDOW = WindowConfig(t_s_ns=755.0, t_e_ns=850.0)


@dataclass(frozen=True)
class WindowCurvePoint:
    t_s_ns: float
    s_value: float
    qber: float
    relative_rate: float
    key_per_time: float


def full_window(m: EmissionTimeModel, t_e_ns: float = 850.0) -> WindowConfig:
    return WindowConfig(m.support_start_ns, t_e_ns)


# -- densities -------------------------------------------------------------

def _emg_parts(m: EmissionTimeModel, t):
    lam = 1.0 / m.decay_tau_ns
    sig = m.sigma_ns
    u = np.asarray(t, dtype=float) - m.pulse_center_ns
    z = (u - lam * sig**2) / sig
    # log of exp(-lam*u + lam^2 sig^2 / 2); combined with log_ndtr to avoid inf*0
    log_tilt = -lam * u + 0.5 * (lam * sig) ** 2
    return lam, sig, u, z, log_tilt


def _single_pdf(m, t):
    lam, sig, u, z, log_tilt = _emg_parts(m, t)
    return lam * np.exp(log_tilt + log_ndtr(z))


def _single_cdf(m, t):
    lam, sig, u, z, log_tilt = _emg_parts(m, t)
    return np.clip(ndtr(u / sig) - np.exp(log_tilt + log_ndtr(z)), 0.0, 1.0)


def _double_pdf(m, t):
    lam, sig, u, z, log_tilt = _emg_parts(m, t)
    # z*Phi(z) + phi(z) >= 0; clip rounding noise in the far left tail
    shape = np.clip(z * ndtr(z) + np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi), 0.0, None)
    with np.errstate(over="ignore", invalid="ignore"):
        out = lam * lam * sig * np.exp(log_tilt) * shape
    return np.nan_to_num(out, nan=0.0, posinf=0.0)


def _double_cdf(m, t):
    # Gaussian * Gamma(2, tau): F2 = F1 - tau * f2
    return np.clip(_single_cdf(m, t) - m.decay_tau_ns * _double_pdf(m, t), 0.0, 1.0)


def _re_excited_norm(m: EmissionTimeModel) -> float:
    # P(decay time < independent pulse time) for Gaussian pulse and exponential decay
    a = m.sigma_ns / m.decay_tau_ns
    return 0.5 - math.exp(a * a) * float(ndtr(-a * math.sqrt(2.0)))


def _re_excited_pdf(m, t):
    t = np.asarray(t, dtype=float)
    remaining = ndtr(-(t - m.pulse_center_ns) / m.sigma_ns)
    return _single_pdf(m, t) * remaining / _re_excited_norm(m)


def emission_density(m: EmissionTimeModel, kind: str, t):
    """Probability density (1/ns) of the detected photon's emission time."""
    if kind == "single":
        out = _single_pdf(m, t)
    elif kind == "double_second":
        out = _double_pdf(m, t)
    elif kind == "re_excited":
        out = _re_excited_pdf(m, t)
    else:
        raise DomainError(f"unknown emission kind {kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = QUAD_TOL,
                     max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with an absolute error target."""
    if b <= a:
        return 0.0

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    total = 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(flo, flm, fmid, mid - lo)
        right = simpson(fmid, frm, fhi, hi - mid)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total


_RE_EXCITED_HALF_WIDTH = 12  # in sigma; the density is negligible beyond


@lru_cache(maxsize=64)
def _re_excited_segments(m: EmissionTimeModel) -> np.ndarray:
    # cumulative mass at sigma-spaced edges anchored to the pulse centre, so that
    # every window shares the same partition and differences stay monotone
    sig = m.sigma_ns
    edges = m.pulse_center_ns + sig * np.arange(-_RE_EXCITED_HALF_WIDTH, _RE_EXCITED_HALF_WIDTH + 1)
    f = lambda x: float(_re_excited_pdf(m, x))
    n = len(edges) - 1
    masses = [adaptive_simpson(f, edges[i], edges[i + 1], QUAD_TOL / n) for i in range(n)]
    return np.concatenate([[0.0], np.cumsum(masses)])


def _re_excited_cdf(m: EmissionTimeModel, t: float) -> float:
    sig = m.sigma_ns
    lo = m.pulse_center_ns - _RE_EXCITED_HALF_WIDTH * sig
    cum = _re_excited_segments(m)
    k = int(math.floor((t - lo) / sig))
    if k < 0:
        return 0.0
    if k >= len(cum) - 1:
        return float(cum[-1])
    edge = lo + k * sig
    f = lambda x: float(_re_excited_pdf(m, x))
    return float(cum[k] + adaptive_simpson(f, edge, t, QUAD_TOL / len(cum)))


def _re_excited_mass(m: EmissionTimeModel, a: float, b: float) -> float:
    return _re_excited_cdf(m, b) - _re_excited_cdf(m, a)


def window_probability(m: EmissionTimeModel, kind: str, w: WindowConfig) -> float:
    """Probability that one photon of the given kind falls inside the window."""
    if kind == "single":
        p = _single_cdf(m, w.t_e_ns) - _single_cdf(m, w.t_s_ns)
    elif kind == "double_second":
        p = _double_cdf(m, w.t_e_ns) - _double_cdf(m, w.t_s_ns)
    elif kind == "re_excited":
        p = _re_excited_mass(m, w.t_s_ns, w.t_e_ns)
    else:
        raise DomainError(f"unknown emission kind {kind!r}")
    return float(min(1.0, max(0.0, p)))


# -- window trade-off --------------------------------------------------------

def window_acceptance(m: EmissionTimeModel, w: WindowConfig) -> Tuple[float, float]:
    """(accept_good, accept_bad): both photons must land inside the window."""
    p_single = window_probability(m, "single", w)
    p_bad = window_probability(m, m.bad_photon_kind, w)
    return p_single * p_single, p_single * p_bad


def _weighted_acceptance(m, w):
    good, bad = window_acceptance(m, w)
    eps2 = m.double_emission_fraction
    return (1.0 - eps2) * good, eps2 * bad


def two_photon_acceptance(m: EmissionTimeModel, w: WindowConfig) -> float:
    """Fraction of all two-photon heralds that survive the window."""
    g, b = _weighted_acceptance(m, w)
    return g + b


def contaminated_fraction(m: EmissionTimeModel, w: WindowConfig) -> float:
    g, b = _weighted_acceptance(m, w)
    if g + b <= 0.0:
        raise UndefinedWindowError(f"window [{w.t_s_ns}, {w.t_e_ns}] accepts no events")
    return b / (g + b)


def effective_visibility(m: EmissionTimeModel, w: WindowConfig) -> float:
    return m.v_max * (1.0 - contaminated_fraction(m, w))


def _point(m, t_s, t_e, rate_fn, full_rate):
    w = WindowConfig(t_s, t_e)
    v = effective_visibility(m, w)
    s = 2.0 * math.sqrt(2.0) * v
    q = (1.0 - v) / 2.0 + m.q_floor
    rel = two_photon_acceptance(m, w) / full_rate
    return WindowCurvePoint(t_s, s, q, rel, rel * max(0.0, rate_fn(s, q)))


def window_scan(m: EmissionTimeModel, t_s_grid: Iterable[float], t_e: float = 850.0,
                rate_fn: RateFn = asymptotic_rate) -> List[WindowCurvePoint]:
    grid = [float(t) for t in t_s_grid]
    if not grid:
        raise DomainError("window scan needs at least one start time")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("start-time grid must be sorted ascending")
    if grid[-1] >= t_e:
        raise DomainError("every start time must precede the window end")
    full_rate = two_photon_acceptance(m, full_window(m, t_e))
    return [_point(m, t, t_e, rate_fn, full_rate) for t in grid]


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 0.01) -> float:
    """Maximizer of a unimodal ``f`` on [a, b] to within ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        # >= keeps the left interval on ties: prefer earlier starts
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_window(m: EmissionTimeModel, t_e: float = 850.0, rate_fn: RateFn = asymptotic_rate,
                    search_bounds: Tuple[float, float] | None = None) -> float:
    """Window start maximizing key per unit time.

    A 1 ns grid locates the best cell, golden-section search refines it to
    0.01 ns. Ties go to the earlier start, which has the higher event rate.
    """
    lo, hi = search_bounds if search_bounds is not None else (m.pulse_center_ns - 2.0 * m.pulse_fwhm_ns, t_e - 10.0)
    if not m.support_start_ns <= lo < hi < t_e:
        raise DomainError(f"search bounds ({lo}, {hi}) must lie inside ({m.support_start_ns}, {t_e})")
    full_rate = two_photon_acceptance(m, full_window(m, t_e))

    def key_rate(t):
        return _point(m, t, t_e, rate_fn, full_rate).key_per_time

    grid = np.arange(lo, hi, 1.0).tolist() + [hi]
    values = [key_rate(t) for t in grid]
    best = int(np.argmax(values))  # first maximum, i.e. the earliest start
    if values[best] <= 0.0:
        raise NoPositiveKeyError("key rate is not positive anywhere in the search interval")
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    t_star = golden_section_max(key_rate, a, b)
    if values[best] >= key_rate(t_star):
        return grid[best]
    return t_star


# -- calibration ------------------------------------------------------------

_EPS2_CAP = 1.0 - 1e-9

CALIBRATION_TARGETS = {
    "s_value": 2.578,
    "qber": 0.078,
    "two_photon_acceptance": 0.27,
}


def calibrate_model(base: EmissionTimeModel = EmissionTimeModel(), window: WindowConfig = KEY_WINDOW,
                    targets: dict | None = None) -> EmissionTimeModel:
    """Fit pulse position, contamination fraction and residual error to the targets.

    ``v_max``, the pulse width and the decay time are held at ``base``.
    The pulse position is set by the two-photon acceptance, the contamination
    fraction by the CHSH value, and ``q_floor`` closes the QBER gap.
    """
    from scipy.optimize import brentq

    t = dict(CALIBRATION_TARGETS)
    t.update(targets or {})
    v_target = t["s_value"] / (2.0 * math.sqrt(2.0))
    if v_target >= base.v_max:
        raise DomainError("target visibility must lie below v_max")

    def eps_for(model):
        # contaminated fraction needed inside the window, mapped back to eps2
        frac = 1.0 - v_target / model.v_max
        good, bad = window_acceptance(model, window)
        if bad <= 0.0:
            return _EPS2_CAP
        ratio = frac / (1.0 - frac) * good / bad
        return min(ratio / (1.0 + ratio), _EPS2_CAP)

    def acceptance_gap(center):
        model = replace(base, pulse_center_ns=center, double_emission_fraction=0.0)
        model = replace(model, double_emission_fraction=eps_for(model))
        return two_photon_acceptance(model, window) - t["two_photon_acceptance"]

    hi = window.t_s_ns + 0.5 * base.pulse_fwhm_ns
    lo = window.t_s_ns - 2.0 * base.pulse_fwhm_ns
    center = brentq(acceptance_gap, lo, hi, xtol=1e-9)
    model = replace(base, pulse_center_ns=center, double_emission_fraction=0.0)
    model = replace(model, double_emission_fraction=eps_for(model))
    v = effective_visibility(model, window)
    return replace(model, q_floor=t["qber"] - (1.0 - v) / 2.0)
