import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diqkd.errors import DomainError
from diqkd.quantum import (
    DEFAULT_CONVENTION,
    MeasurementConvention,
    ReadoutSetting,
    TwoQubitState,
    chsh_from_correlators,
    correlator,
    fidelity,
    fidelity_lower_bound,
    joint_outcome_probs,
    psi_plus,
    readout_projector,
    werner,
    werner_correlator,
    wrap_angle_deg,
)

ALPHA = (-22.5, 22.5, -45.0, 0.0)
BETA = (-22.5, 22.5)


def born_e(v, a, b, conv=DEFAULT_CONVENTION):
    d = joint_outcome_probs(werner(v), ReadoutSetting(wrap_angle_deg(a)), ReadoutSetting(wrap_angle_deg(b)), conv)
    return correlator(d)


def chsh_of(e):
    return chsh_from_correlators(e(2, 0), e(3, 0), e(2, 1), e(3, 1))


def test_psi_plus_is_pure_and_normalized():
    rho = psi_plus().rho
    assert np.isclose(np.trace(rho).real, 1.0)
    assert np.allclose(rho @ rho, rho)


def test_werner_rejects_out_of_range():
    with pytest.raises(DomainError):
        werner(1.1)


def test_state_validation():
    with pytest.raises(DomainError):
        TwoQubitState(np.eye(4))  # trace 4
    bad = np.diag([1.5, -0.5, 0, 0]).astype(complex)
    with pytest.raises(DomainError):
        TwoQubitState(bad)


@pytest.mark.parametrize("gamma", [-90.0, -30.0, 0.0, 45.0, 89.9])
def test_projector_idempotent_and_hermitian(gamma):
    p = readout_projector(ReadoutSetting(gamma, 0.3))
    assert np.allclose(p @ p, p, atol=1e-12)
    assert np.allclose(p, p.conj().T, atol=1e-12)
    assert np.isclose(np.trace(p).real, 1.0)


@pytest.mark.parametrize("v", [0.0, 0.25, 0.5, 0.87, 1.0])
def test_born_rule_matches_closed_form_on_grid(v):
    rho, worst = werner(v), 0.0
    for a in range(-90, 90, 3):
        for b in range(-90, 90, 3):
            e = correlator(joint_outcome_probs(rho, ReadoutSetting(a), ReadoutSetting(b)))
            worst = max(worst, abs(e - werner_correlator(v, a, b)))
    assert worst < 1e-10


def test_sign_flip_alone_gives_positive_correlation():
    # without the 90 degree offset, Bob's sign flip yields +cos(2(a-b))
    conv = MeasurementConvention(bob_angle_sign=-1, bob_angle_offset_deg=0.0)
    assert born_e(1.0, 10.0, 10.0, conv) == pytest.approx(1.0, abs=1e-12)
    assert born_e(1.0, 10.0, 10.0) == pytest.approx(-1.0, abs=1e-12)


def test_tsirelson_at_standard_settings():
    s = chsh_of(lambda x, y: born_e(1.0, ALPHA[x], BETA[y]))
    assert s == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)


def test_local_strategies_never_exceed_two():
    best = 0.0
    for strat in itertools.product((-1, 1), repeat=6):
        a, b = strat[:4], strat[4:]
        best = max(best, abs(chsh_of(lambda x, y: a[x] * b[y])))
    assert best == 2


def test_fidelity_lower_bound_values():
    assert fidelity_lower_bound([0.942, 0.930, 0.942, 0.954]) == pytest.approx(0.9517, abs=5e-5)
    assert fidelity_lower_bound([0.943, 0.917]) == pytest.approx(0.9417, abs=5e-5)
    assert fidelity_lower_bound([1.0]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        fidelity_lower_bound([])


def test_werner_fidelity_closed_form():
    for v in (0.0, 0.4, 0.9):
        assert fidelity(werner(v), psi_plus()) == pytest.approx((1 + 3 * v) / 4)


@settings(max_examples=60, deadline=None)
@given(v=st.floats(0, 1), a=st.floats(-90, 89.99), b=st.floats(-90, 89.99), phi=st.floats(0.0, 6.28))
def test_outcome_distribution_is_probability(v, a, b, phi):
    d = joint_outcome_probs(werner(v), ReadoutSetting(a, phi), ReadoutSetting(b, phi))
    assert np.all(d.p >= -1e-12)
    assert d.p.sum() == pytest.approx(1.0)
    # Werner marginals are unbiased
    assert d.p[0].sum() == pytest.approx(0.5, abs=1e-9)
    assert d.p[:, 0].sum() == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(v=st.floats(0, 1))
def test_chsh_scales_linearly_with_visibility(v):
    s = chsh_of(lambda x, y: born_e(v, ALPHA[x], BETA[y]))
    assert s == pytest.approx(2.0 * math.sqrt(2.0) * v, abs=1e-10)
