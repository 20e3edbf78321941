"""Quantum Fisher information, measurement incompatibility, and model scalars.

Two independent routes are provided for the information matrices: the
overlap formulas evaluated on derivative states, and the closed-form
trigonometric expressions in the encoding angles.  They must agree to
1e-10 and tests enforce that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ATOL_ALGEBRA, DET_EPS, EncodingConfig, state_norm_error

#: |d12| at or below this flags the compatibility measure as infinite.
D12_EPS = 1e-6

#: Norm deviation beyond this rejects a state as non-normalized.
NORM_TOL = 1e-9


@dataclass(frozen=True)
class QfimMatrix:
    """Symmetric 2x2 quantum Fisher information matrix (per shot)."""

    q11: float
    q12: float
    q22: float

    @property
    def det(self) -> float:
        return self.q11 * self.q22 - self.q12 * self.q12

    @property
    def trace(self) -> float:
        return self.q11 + self.q22

    def as_array(self) -> np.ndarray:
        return np.array([[self.q11, self.q12], [self.q12, self.q22]])


@dataclass(frozen=True)
class MucMatrix:
    """Antisymmetric 2x2 incompatibility (mean Uhlmann curvature) matrix.

    Only the independent entry d12 is stored; d11 = d22 = 0 and
    d21 = -d12 are structural.
    """

    d12: float

    @property
    def det(self) -> float:
        return self.d12 * self.d12

    def as_array(self) -> np.ndarray:
        return np.array([[0.0, self.d12], [-self.d12, 0.0]])


@dataclass(frozen=True)
class XyzfValues:
    """The trigonometric combinations X, Y, Z and effective phase f."""

    x: float
    y: float
    z: float
    f: float


@dataclass(frozen=True)
class ModelScalars:
    """Sloppiness s, compatibility c, and quantumness r for one model point.

    ``s``/``c`` are math.inf when the model is singular; the raw
    determinants are always retained.  ``r`` is clipped to [0, 1] with the
    unclipped value kept in ``r_raw``; both are NaN when undefined.
    """

    det_q: float
    det_d: float
    s: float
    c: float
    r: float
    r_raw: float
    sloppy: bool
    c_infinite: bool


def _check_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    err = state_norm_error(psi)
    if err > NORM_TOL:
        raise ValueError(f"state is not normalized: |<psi|psi> - 1| = {err:.3e}")
    return psi


def qfim_from_states(
    psi: np.ndarray, dpsi1: np.ndarray, dpsi2: np.ndarray
) -> QfimMatrix:
    """QFIM from the pure-state overlap formula.

    Q_mn = 4 Re(<d_m psi|d_n psi> - <d_m psi|psi><psi|d_n psi>).
    """
    psi = _check_state(psi)
    d = (np.asarray(dpsi1, dtype=complex), np.asarray(dpsi2, dtype=complex))

    def element(m: int, n: int) -> float:
        direct = np.vdot(d[m], d[n])
        geometric = np.vdot(d[m], psi) * np.vdot(psi, d[n])
        return 4.0 * float((direct - geometric).real)

    return QfimMatrix(q11=element(0, 0), q12=element(0, 1), q22=element(1, 1))


def muc_from_states(
    psi: np.ndarray, dpsi1: np.ndarray, dpsi2: np.ndarray
) -> MucMatrix:
    """Incompatibility matrix entry d12 from the pure-state overlap formula."""
    psi = _check_state(psi)
    d1 = np.asarray(dpsi1, dtype=complex)
    d2 = np.asarray(dpsi2, dtype=complex)
    direct = np.vdot(d1, d2)
    geometric = np.vdot(d1, psi) * np.vdot(psi, d2)
    return MucMatrix(d12=4.0 * float((direct - geometric).imag))


def sld_operators(
    psi: np.ndarray, dpsi1: np.ndarray, dpsi2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric logarithmic derivatives for the pure model.

    For rho = |psi><psi| the SLD is L_m = 2(|d_m psi><psi| + |psi><d_m psi|).
    """
    psi = _check_state(psi)

    def sld(dpsi: np.ndarray) -> np.ndarray:
        dpsi = np.asarray(dpsi, dtype=complex)
        op = 2.0 * (np.outer(dpsi, psi.conj()) + np.outer(psi, dpsi.conj()))
        assert np.max(np.abs(op - op.conj().T)) <= ATOL_ALGEBRA
        return op

    return sld(dpsi1), sld(dpsi2)


def closed_form_xyzf(cfg: EncodingConfig) -> XyzfValues:
    """X, Y, Z, f evaluated from the encoding angles.

    X = cos^2(g) + sin^2(g) cos(2t)
    Y = sin(g) sin(t) (sin(f) cos(g) + sin(g) cos(t) cos(f))
    Z = sin(g) sin(t) (cos(f) cos(g) - sin(g) cos(t) sin(f))
    with g = gamma, t = theta, f = 2*lambda1 + beta - phi.
    """
    f = cfg.f
    sg, cg = math.sin(cfg.gamma), math.cos(cfg.gamma)
    st, ct = math.sin(cfg.theta), math.cos(cfg.theta)
    sf, cf = math.sin(f), math.cos(f)
    x = cg * cg + sg * sg * math.cos(2.0 * cfg.theta)
    y = sg * st * (sf * cg + sg * ct * cf)
    z = sg * st * (cf * cg - sg * ct * sf)
    return XyzfValues(x=x, y=y, z=z, f=f)


def qfim_closed_form(cfg: EncodingConfig) -> tuple[QfimMatrix, MucMatrix]:
    """QFIM and incompatibility matrix from the closed-form expressions."""
    vals = closed_form_xyzf(cfg)
    sa, ca = math.sin(cfg.alpha), math.cos(cfg.alpha)
    s2a = math.sin(2.0 * cfg.alpha)
    q11 = 4.0 * sa * sa
    q12 = 4.0 * (vals.x * sa * sa - vals.y * s2a)
    q22 = 4.0 * (1.0 - (vals.x * ca + 2.0 * vals.y * sa) ** 2)
    d12 = -8.0 * vals.z * sa
    return QfimMatrix(q11=q11, q12=q12, q22=q22), MucMatrix(d12=d12)


def model_scalars(
    q: QfimMatrix, d: MucMatrix, det_eps: float = DET_EPS, d12_eps: float = D12_EPS
) -> ModelScalars:
    """Sloppiness s = 1/det Q, compatibility c = 2/Tr[D^t D], quantumness r.

    Degenerate values are signaled through flags (with inf/NaN payloads),
    never raised.
    """
    det_q = q.det
    det_d = d.det
    sloppy = det_q <= det_eps
    c_infinite = abs(d.d12) <= d12_eps
    s = math.inf if sloppy else 1.0 / det_q
    c = math.inf if c_infinite else 1.0 / (d.d12 * d.d12)
    if sloppy:
        r_raw = math.nan
    else:
        ratio = det_d / det_q
        r_raw = math.sqrt(ratio) if ratio >= 0.0 else math.nan
    r = min(max(r_raw, 0.0), 1.0) if math.isfinite(r_raw) else r_raw
    return ModelScalars(
        det_q=det_q,
        det_d=det_d,
        s=s,
        c=c,
        r=r,
        r_raw=r_raw,
        sloppy=sloppy,
        c_infinite=c_infinite,
    )


def weak_compatibility(d: MucMatrix, tol: float) -> bool:
    """Whether the weak compatibility condition |d12| <= tol holds."""
    if not tol > 0.0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")
    return abs(d.d12) <= tol
