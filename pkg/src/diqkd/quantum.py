"""Two-qubit state and readout model for the atom-atom link.

Basis ordering for every 4x4 matrix is the z basis (up-up, up-down,
down-up, down-down). Output 1 means the atom survived the readout, i.e. it
was projected onto the readout state; output 0 means it was ionized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

MATRIX_TOL = 1e-12
POSITIVITY_TOL = 1e-10

UP_Z = np.array([1.0, 0.0], dtype=complex)
DOWN_Z = np.array([0.0, 1.0], dtype=complex)
UP_X = (UP_Z + DOWN_Z) / math.sqrt(2.0)
DOWN_X = (UP_Z - DOWN_Z) / math.sqrt(2.0)


@dataclass(frozen=True)
class ReadoutSetting:
    gamma_deg: float
    phi_rad: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.gamma_deg <= 90.0:
            raise DomainError(f"gamma_deg must lie in [-90, 90], got {self.gamma_deg}")
        if not 0.0 <= self.phi_rad < 2.0 * math.pi:
            raise DomainError(f"phi_rad must lie in [0, 2pi), got {self.phi_rad}")


@dataclass(frozen=True)
class MeasurementConvention:
    """How Bob's nominal readout angle maps onto the projector angle.

    The projector is built from ``bob_angle_sign * beta + bob_angle_offset_deg``
    (wrapped to [-90, 90)). The defaults make the Born-rule correlator equal
    ``-V cos 2(alpha - beta)``, the sign pattern seen in the measured data.
    """

    bob_angle_sign: int = -1
    bob_angle_offset_deg: float = 90.0

    def __post_init__(self):
        if self.bob_angle_sign not in (1, -1):
            raise DomainError("bob_angle_sign must be +1 or -1")

    def bob_gamma(self, beta_deg: float) -> float:
        return wrap_angle_deg(self.bob_angle_sign * beta_deg + self.bob_angle_offset_deg)


DEFAULT_CONVENTION = MeasurementConvention()


def wrap_angle_deg(gamma_deg: float) -> float:
    """Map an angle onto [-90, 90). Projectors have period 180 degrees in gamma."""
    return (gamma_deg + 90.0) % 180.0 - 90.0


class TwoQubitState:
    """Validated 4x4 density matrix."""

    def __init__(self, rho, visibility_tag: Optional[float] = None):
        rho = np.array(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise DomainError(f"density matrix must be 4x4, got {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=MATRIX_TOL, rtol=0):
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > MATRIX_TOL:
            raise DomainError(f"density matrix trace is {np.trace(rho).real}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
            raise DomainError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        self.rho = rho
        self.visibility_tag = visibility_tag

    def __repr__(self):
        return f"TwoQubitState(visibility_tag={self.visibility_tag!r})"


@dataclass(frozen=True)
class OutcomeDistribution:
    """Joint output probabilities, indexed ``p[a][b]``."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2):
            raise DomainError("outcome distribution must be 2x2")
        if (p < -MATRIX_TOL).any() or abs(p.sum() - 1.0) > MATRIX_TOL:
            raise DomainError("outcome distribution is not normalized")
        object.__setattr__(self, "p", np.clip(p, 0.0, None))


def psi_plus() -> TwoQubitState:
    psi = (np.kron(UP_Z, DOWN_Z) + np.kron(DOWN_Z, UP_Z)) / math.sqrt(2.0)
    return TwoQubitState(np.outer(psi, psi.conj()), visibility_tag=1.0)


def werner(v: float) -> TwoQubitState:
    """Psi+ mixed with white noise: ``v |Psi+><Psi+| + (1 - v) I/4``."""
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"Werner visibility must lie in [0, 1], got {v}")
    rho = v * psi_plus().rho + (1.0 - v) * np.eye(4) / 4.0
    return TwoQubitState(rho, visibility_tag=v)


def readout_state(s: ReadoutSetting) -> np.ndarray:
    g = math.radians(s.gamma_deg)
    return np.exp(1j * s.phi_rad) * math.cos(g) * UP_X - math.sin(g) * DOWN_X


def readout_projector(s: ReadoutSetting) -> np.ndarray:
    d = readout_state(s)
    return np.outer(d, d.conj())


def joint_outcome_probs(
    state: TwoQubitState,
    sa: ReadoutSetting,
    sb: ReadoutSetting,
    conv: MeasurementConvention = DEFAULT_CONVENTION,
) -> OutcomeDistribution:
    rho = state.rho
    if abs(np.trace(rho).real - 1.0) > MATRIX_TOL:
        raise DomainError("state is not normalized")
    pa1 = readout_projector(sa)
    pb1 = readout_projector(ReadoutSetting(conv.bob_gamma(sb.gamma_deg), sb.phi_rad))
    eye = np.eye(2)
    proj_a = np.stack((eye - pa1, pa1))
    proj_b = np.stack((eye - pb1, pb1))
    # p[a, b] = Tr((A_a kron B_b) rho), with rho indexed as [i k, j l]
    p = np.einsum("aji,blk,ikjl->ab", proj_a, proj_b, rho.reshape(2, 2, 2, 2)).real
    return OutcomeDistribution(p / p.sum())


def correlator(d: OutcomeDistribution) -> float:
    p = d.p
    return float(p[1, 1] + p[0, 0] - p[0, 1] - p[1, 0])


def werner_correlator(v: float, alpha_deg: float, beta_deg: float) -> float:
    """Closed form of the Born-rule correlator under the default convention."""
    return -v * math.cos(2.0 * math.radians(alpha_deg - beta_deg))


def chsh_from_correlators(e20: float, e30: float, e21: float, e31: float) -> float:
    return e21 - e20 - e30 - e31


def fidelity_lower_bound(visibilities: Sequence[float]) -> float:
    """Fidelity bound ``1/6 + 5/6 * mean(Vis)`` for depolarizing noise on a 2x3 space."""
    vis = list(visibilities)
    if not vis:
        raise DomainError("at least one visibility is required")
    if any(not 0.0 <= v <= 1.0 for v in vis):
        raise DomainError("visibilities must lie in [0, 1]")
    return 1.0 / 6.0 + 5.0 / 6.0 * (sum(vis) / len(vis))


def fidelity(state: TwoQubitState, target: TwoQubitState) -> float:
    """Fidelity with a pure target state, ``Tr(rho_target rho)``."""
    return float(np.trace(target.rho @ state.rho).real)
