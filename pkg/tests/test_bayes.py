import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from diqkd.bayes import (
    BetaPosterior,
    beta_inv_cdf,
    chsh_win_count,
    fit_visibility,
    posterior_from_counts,
    reg_inc_beta,
    table_row_visibility,
    worst_case_bounds,
)
from diqkd.errors import DomainError
from diqkd.protocol import CorrelationTable

P_GRID = [round(0.01 * k, 2) for k in range(1, 100)]
SHAPES = [(1, 1), (36, 414), (1356, 295)]


def mp_ibeta(a, b, x):
    mpmath.mp.dps = 40
    return float(mpmath.betainc(a, b, 0, x, regularized=True))


def test_incomplete_beta_against_mpmath():
    # series/quadrature oracle; the frozen value is 0.519418
    assert mp_ibeta(36, 414, 0.08) == pytest.approx(0.519418, abs=1e-6)
    assert reg_inc_beta(36, 414, 0.08) == pytest.approx(mp_ibeta(36, 414, 0.08), abs=1e-12)
    for a, b, x in [(0.5, 0.5, 0.3), (2, 7, 0.9), (1356, 295, 0.8), (5, 5, 0.5), (33, 381, 0.12)]:
        assert reg_inc_beta(a, b, x) == pytest.approx(mp_ibeta(a, b, x), abs=1e-12)


def test_incomplete_beta_trivial_cases():
    for x in (0.0, 0.2, 0.77, 1.0):
        assert reg_inc_beta(1, 1, x) == pytest.approx(x, abs=1e-15)
    assert reg_inc_beta(3, 4, 0.0) == 0.0
    assert reg_inc_beta(3, 4, 1.0) == 1.0
    with pytest.raises(DomainError):
        reg_inc_beta(0, 1, 0.5)
    with pytest.raises(DomainError):
        reg_inc_beta(1, 1, 1.5)


@pytest.mark.parametrize("a,b", SHAPES)
def test_inverse_round_trip(a, b):
    for p in P_GRID:
        x = beta_inv_cdf(a, b, p)
        assert abs(reg_inc_beta(a, b, x) - p) < 1e-9
        assert x == pytest.approx(stats.beta.ppf(p, a, b), abs=1e-9)


@pytest.mark.parametrize("a,b", SHAPES)
def test_inverse_strictly_increasing(a, b):
    xs = [beta_inv_cdf(a, b, p) for p in P_GRID]
    assert all(y > x for x, y in zip(xs, xs[1:]))


def test_inverse_reference_values():
    assert beta_inv_cdf(1, 1, 0.3) == pytest.approx(0.3, abs=1e-12)
    assert beta_inv_cdf(1356, 295, 0.03) == pytest.approx(0.80320, abs=5e-4)
    # oracle value; a rounded 0.107 bound is looser
    assert beta_inv_cdf(36, 414, 0.97) == pytest.approx(0.105548, abs=1e-6)
    with pytest.raises(DomainError):
        beta_inv_cdf(1, 1, 1.0)


def test_posteriors():
    assert posterior_from_counts(0, 0) == BetaPosterior(1, 1)
    assert posterior_from_counts(1355, 1649) == BetaPosterior(1356, 295)
    assert posterior_from_counts(35, 448) == BetaPosterior(36, 414)
    with pytest.raises(DomainError):
        posterior_from_counts(5, 4)


@pytest.mark.parametrize("s,n", [(0, 3), (2, 5), (7, 10)])
def test_posterior_mean_monte_carlo(s, n):
    post = posterior_from_counts(s, n)
    draws = np.random.default_rng(0).beta(post.a, post.b, 200000)
    assert post.mean == pytest.approx((s + 1) / (n + 2))
    assert abs(draws.mean() - post.mean) < 5 * draws.std() / math.sqrt(len(draws))


def test_win_counts(table1):
    assert chsh_win_count(table1, "paper_floor") == 1355
    assert chsh_win_count(table1, "direct") == 326 + 311 + 361 + 359
    with pytest.raises(DomainError):
        chsh_win_count(table1, "other")


def test_win_count_methods_agree_when_symmetric():
    t = CorrelationTable(np.full((4, 2), 100), np.zeros((4, 2), dtype=int))
    assert chsh_win_count(t, "paper_floor") == chsh_win_count(t, "direct")


def test_worst_case_bounds_table1(table1):
    wb = worst_case_bounds(table1)
    assert wb.s_min == pytest.approx(8 * stats.beta.ppf(0.03, 1356, 295) - 4, abs=1e-9)
    assert wb.s_min == pytest.approx(2.4256, abs=3e-3)
    assert wb.q0_max == pytest.approx(stats.beta.ppf(0.97, 36, 414), abs=1e-9)
    assert wb.q1_max == pytest.approx(stats.beta.ppf(0.97, 33, 381), abs=1e-9)
    assert wb.q1_max == pytest.approx(0.107, abs=2e-3)


def test_bounds_tighten_with_more_data(table1):
    assert worst_case_bounds(table1.scaled(2)).s_min > worst_case_bounds(table1).s_min


def test_bounds_approach_point_estimate_near_median(table1):
    from diqkd.protocol import estimate_bell
    s_med = worst_case_bounds(table1, tail=0.4999).s_min
    assert s_med == pytest.approx(8 * stats.beta.median(1356, 295) - 4, abs=1e-3)
    # prior and flooring shift the median a little below the point estimate
    assert s_med == pytest.approx(estimate_bell(table1).s_value, abs=1e-2)


def test_visibility_rows(table1):
    assert table_row_visibility(table1, 0) == pytest.approx(0.869, abs=2e-3)
    assert table_row_visibility(table1, 1) == pytest.approx(0.888, abs=2e-3)
    e = [-0.599, -0.844, -0.664, -0.035]
    assert fit_visibility(e, [-22.5, 0, 22.5, 45]) == pytest.approx(0.869, abs=1e-3)


def test_visibility_fit_degenerate():
    with pytest.raises(DomainError):
        fit_visibility([0.1, 0.2], [45.0, -45.0])
    with pytest.raises(DomainError):
        fit_visibility([0.1], [0.0])


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(0.01, 1.0), deltas=st.lists(st.floats(-90, 90), min_size=2, max_size=8))
def test_fit_is_scale_consistent(lam, deltas):
    c = [math.cos(2 * math.radians(d)) for d in deltas]
    if sum(x * x for x in c) < 1e-6:
        return
    e = [-0.8 * x for x in c]
    assert fit_visibility(e, deltas) == pytest.approx(0.8)
    assert fit_visibility([lam * x for x in e], deltas) == pytest.approx(0.8 * lam)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(20, 400), data=st.data())
def test_s_min_non_decreasing_in_wins(n, data):
    w = data.draw(st.integers(0, n - 1))
    lo = 8 * beta_inv_cdf(*_ab(w, n), 0.03)
    hi = 8 * beta_inv_cdf(*_ab(w + 1, n), 0.03)
    assert hi >= lo


def _ab(w, n):
    p = posterior_from_counts(w, n)
    return p.a, p.b
