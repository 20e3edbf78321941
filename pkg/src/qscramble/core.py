"""Qubit state preparation, phase encoding, and the scrambling rotation.

The statistical model lives on a single qubit: a probe state is rotated
about the z axis by lambda1, scrambled by a rotation of strength gamma
about an arbitrary axis (theta, phi), and rotated about z again by
lambda2.  All heavy lifting is plain 2x2 complex linear algebra.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

# Tolerance ladder, fixed globally:
#   algebraic identities (unitarity, hermiticity, norm) .... 1e-12
#   agreement between independent computation routes ....... 1e-10
#   analytic derivatives vs central finite differences ..... 1e-8
ATOL_ALGEBRA = 1e-12
ATOL_ROUTE = 1e-10
ATOL_FINITE_DIFF = 1e-8

#: Determinants at or below this are treated as singular (sloppy model).
DET_EPS = 1e-12

#: Default central-difference step, balancing truncation vs rounding.
DEFAULT_FD_STEP = 1e-6

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class EncodingConfig:
    """The seven angles (radians) defining probe, scrambler, and parameters.

    alpha, beta fix the probe state; gamma, theta, phi the scrambling
    rotation; lambda1, lambda2 are the encoded parameters.  Angles are
    stored as given (no wrapping); use :func:`canonicalize_angle` for
    reporting.
    """

    alpha: float
    beta: float
    gamma: float
    theta: float
    phi: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        _require_finite(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            theta=self.theta,
            phi=self.phi,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
        )

    @property
    def f(self) -> float:
        """Effective phase 2*lambda1 + beta - phi entering the closed forms."""
        return 2.0 * self.lambda1 + self.beta - self.phi

    def replace(self, **changes: float) -> "EncodingConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def canonicalize_angle(angle: float) -> float:
    """Map an angle to the principal interval [-pi, pi)."""
    _require_finite(angle=angle)
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def rotation_z(angle: float) -> np.ndarray:
    """Unitary exp(-i * angle * sigma_z) = diag(e^{-i angle}, e^{+i angle})."""
    _require_finite(angle=angle)
    return np.array(
        [[np.exp(-1j * angle), 0.0], [0.0, np.exp(1j * angle)]], dtype=complex
    )


def rotation_axis(gamma: float, theta: float, phi: float) -> np.ndarray:
    """Unitary exp(-i * gamma * n.sigma) for the axis n(theta, phi).

    Uses the closed form cos(gamma) I - i sin(gamma) (n.sigma), with
    n = (cos phi sin theta, sin phi sin theta, cos theta).
    """
    _require_finite(gamma=gamma, theta=theta, phi=phi)
    nx = math.cos(phi) * math.sin(theta)
    ny = math.sin(phi) * math.sin(theta)
    nz = math.cos(theta)
    n_dot_sigma = nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z
    return math.cos(gamma) * IDENTITY - 1j * math.sin(gamma) * n_dot_sigma


def prepare_probe(alpha: float, beta: float) -> np.ndarray:
    """Probe state cos(alpha/2)|0> + e^{i beta} sin(alpha/2)|1>."""
    _require_finite(alpha=alpha, beta=beta)
    return np.array(
        [math.cos(alpha / 2.0), np.exp(1j * beta) * math.sin(alpha / 2.0)],
        dtype=complex,
    )


def encode(cfg: EncodingConfig) -> np.ndarray:
    """Encoded state U2 V U1 |psi0> for the given configuration."""
    psi0 = prepare_probe(cfg.alpha, cfg.beta)
    u1 = rotation_z(cfg.lambda1)
    v = rotation_axis(cfg.gamma, cfg.theta, cfg.phi)
    u2 = rotation_z(cfg.lambda2)
    return u2 @ (v @ (u1 @ psi0))


def encode_derivatives(
    cfg: EncodingConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encoded state and its analytic derivatives w.r.t. lambda1, lambda2.

    d/dlambda1 psi = U2 V (-i sigma_z) U1 psi0 and
    d/dlambda2 psi = (-i sigma_z) U2 V U1 psi0.  The derivative vectors
    are tangent vectors, not states: they are intentionally unnormalized
    (both happen to have unit norm for this model, which tests verify).
    """
    psi0 = prepare_probe(cfg.alpha, cfg.beta)
    u1 = rotation_z(cfg.lambda1)
    v = rotation_axis(cfg.gamma, cfg.theta, cfg.phi)
    u2 = rotation_z(cfg.lambda2)

    after_u1 = u1 @ psi0
    minus_i_sz = -1j * PAULI_Z
    psi = u2 @ (v @ after_u1)
    dpsi1 = u2 @ (v @ (minus_i_sz @ after_u1))
    dpsi2 = minus_i_sz @ psi
    return psi, dpsi1, dpsi2


def finite_diff_derivatives(
    cfg: EncodingConfig, h: float = DEFAULT_FD_STEP
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference derivative states, the oracle for encode_derivatives."""
    if not (0.0 < h <= 1e-3):
        raise ValueError(f"step size must satisfy 0 < h <= 1e-3, got {h!r}")
    dpsi1 = (
        encode(cfg.replace(lambda1=cfg.lambda1 + h))
        - encode(cfg.replace(lambda1=cfg.lambda1 - h))
    ) / (2.0 * h)
    dpsi2 = (
        encode(cfg.replace(lambda2=cfg.lambda2 + h))
        - encode(cfg.replace(lambda2=cfg.lambda2 - h))
    ) / (2.0 * h)
    return dpsi1, dpsi2


def is_unitary(u: np.ndarray, atol: float = ATOL_ALGEBRA) -> bool:
    """True when U^dagger U = I within atol, elementwise."""
    u = np.asarray(u, dtype=complex)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol)


def is_hermitian(m: np.ndarray, atol: float = ATOL_ALGEBRA) -> bool:
    """True when M equals its conjugate transpose within atol, elementwise."""
    m = np.asarray(m, dtype=complex)
    return bool(np.max(np.abs(m - m.conj().T)) <= atol)


def state_norm_error(psi: np.ndarray) -> float:
    """Absolute deviation of the squared norm from 1."""
    psi = np.asarray(psi, dtype=complex)
    return abs(float(np.vdot(psi, psi).real) - 1.0)
