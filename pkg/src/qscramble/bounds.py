"""Scalar Cramer-Rao bound hierarchy for the two-parameter qubit model.

All bounds are reported per shot (one probe preparation); callers divide
by the number of repetitions.  For this pure qubit model the Holevo,
Nagaoka, and right-logarithmic-derivative bounds coincide, so a single
closed form covers all three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DET_EPS, EncodingConfig
from .fisher import (
    ModelScalars,
    MucMatrix,
    QfimMatrix,
    model_scalars,
    qfim_closed_form,
    weak_compatibility,
)

#: |d12| threshold for the weak-compatibility flag in reports.
WCC_TOL = 1e-9


class SingularModelError(ValueError):
    """The QFIM is singular (sloppy model): the requested bound is undefined."""


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric positive definite 2x2 weight for scalarizing covariance."""

    w11: float
    w12: float
    w22: float

    def __post_init__(self):
        # Leading-minor test with 1e-12 slack.
        if not (self.w11 > 1e-12 and self.det > 1e-12):
            raise ValueError(
                f"weight matrix must be positive definite, got "
                f"w11={self.w11!r}, det={self.det!r}"
            )

    @classmethod
    def identity(cls) -> "WeightMatrix":
        return cls(1.0, 0.0, 1.0)

    @property
    def det(self) -> float:
        return self.w11 * self.w22 - self.w12 * self.w12

    def as_array(self) -> np.ndarray:
        return np.array([[self.w11, self.w12], [self.w12, self.w22]])


@dataclass(frozen=True)
class BoundsReport:
    """All scalar bounds and model scalars for one configuration.

    ``chain_ok`` records 2 sqrt(s) <= C_S <= C_H <= 2 C_S (slack -1e-10).
    ``sequential_ge_holevo`` records min(K1, K2) >= C_H - 1e-10; it is an
    observation, not a theorem, and is genuinely False at some
    configurations with correlated parameters (q12 != 0).
    """

    c_s: float
    c_h: float
    c_n: float
    c_r: float
    k1: float
    k2: float
    scalars: ModelScalars
    weight: WeightMatrix
    config: EncodingConfig
    sloppy: bool
    weak_compatible: bool
    chain_ok: bool
    sequential_ge_holevo: bool


def _require_invertible(q: QfimMatrix) -> float:
    det = q.det
    if det <= DET_EPS:
        raise SingularModelError(
            f"QFIM is singular (det = {det:.3e} <= {DET_EPS}): sloppy model"
        )
    return det


def sld_bound(q: QfimMatrix, w: WeightMatrix) -> float:
    """SLD Cramer-Rao bound C_S = Tr[W Q^-1] (per shot)."""
    det = _require_invertible(q)
    # Tr[W adj(Q)] / det with adj(Q) = [[q22, -q12], [-q12, q11]].
    return (w.w11 * q.q22 - 2.0 * w.w12 * q.q12 + w.w22 * q.q11) / det


def holevo_nagaoka_bound(q: QfimMatrix, w: WeightMatrix) -> float:
    """Holevo (= Nagaoka = RLD) bound Tr[W Q^-1] + 2 sqrt(det[W Q^-1])."""
    det = _require_invertible(q)
    return sld_bound(q, w) + 2.0 * math.sqrt(w.det / det)


def _trace_norm_2x2(a: np.ndarray) -> float:
    """Sum of singular values of a 2x2 matrix, in closed form.

    With s1 >= s2 >= 0: s1^2 + s2^2 = ||A||_F^2 and s1 s2 = |det A|,
    hence s1 + s2 = sqrt(||A||_F^2 + 2 |det A|).
    """
    frob_sq = float(np.sum(np.abs(a) ** 2))
    det = abs(complex(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]))
    return math.sqrt(max(frob_sq + 2.0 * det, 0.0))


def nagaoka_via_slds(
    psi: np.ndarray,
    l1: np.ndarray,
    l2: np.ndarray,
    q: QfimMatrix,
    w: WeightMatrix,
) -> float:
    """Nagaoka bound via the SLD commutator route.

    C_N = C_S + (sqrt(det W) / det Q) * Tr|rho [L1, L2]|, equal to
    :func:`holevo_nagaoka_bound` for this model.
    """
    det = _require_invertible(q)
    psi = np.asarray(psi, dtype=complex)
    rho = np.outer(psi, psi.conj())
    commutator = l1 @ l2 - l2 @ l1
    return sld_bound(q, w) + math.sqrt(w.det) / det * _trace_norm_2x2(rho @ commutator)


def sequential_bounds(q: QfimMatrix) -> tuple[float, float]:
    """Per-shot bounds K1, K2 for the two-step estimation strategies.

    K1 = 2([Q^-1]_11 + 1/Q_22) covers estimating lambda1 first (lambda2
    unknown) with half the shots, then lambda2 with lambda1 known; K2
    swaps the roles.  Both are >= 4 sqrt(s).
    """
    det = _require_invertible(q)
    if not (q.q11 > 0.0 and q.q22 > 0.0):
        raise SingularModelError(
            f"diagonal QFIM entries must be positive, got {q.q11!r}, {q.q22!r}"
        )
    k1 = 2.0 * (q.q22 / det + 1.0 / q.q22)
    k2 = 2.0 * (q.q11 / det + 1.0 / q.q11)
    return k1, k2


def allocation_bound(s: float, gamma_alloc: float) -> float:
    """Sequential bound 2 sqrt(s) / sqrt(g(1-g)) for shot allocation g.

    Minimized at g = 1/2, where it equals 4 sqrt(s).
    """
    if not (0.0 < gamma_alloc < 1.0):
        raise ValueError(f"allocation must lie strictly in (0, 1), got {gamma_alloc!r}")
    if not (math.isfinite(s) and s > 0.0):
        raise ValueError(f"sloppiness must be finite and positive, got {s!r}")
    return 2.0 * math.sqrt(s) / math.sqrt(gamma_alloc * (1.0 - gamma_alloc))


def hierarchy_report(
    cfg: EncodingConfig, w: WeightMatrix | None = None
) -> BoundsReport:
    """Assemble every bound and scalar for one configuration.

    A sloppy model produces a report with infinite bounds and the sloppy
    flag set rather than raising.
    """
    if w is None:
        w = WeightMatrix.identity()
    q, d = qfim_closed_form(cfg)
    scalars = model_scalars(q, d)
    weak = weak_compatibility(d, WCC_TOL)

    if scalars.sloppy:
        inf = math.inf
        return BoundsReport(
            c_s=inf, c_h=inf, c_n=inf, c_r=inf, k1=inf, k2=inf,
            scalars=scalars, weight=w, config=cfg,
            sloppy=True, weak_compatible=weak,
            chain_ok=True, sequential_ge_holevo=True,
        )

    c_s = sld_bound(q, w)
    c_h = holevo_nagaoka_bound(q, w)
    c_n = c_h
    c_r = c_h  # pure-state equivalence of the RLD and Holevo bounds
    k1, k2 = sequential_bounds(q)

    s = scalars.s
    slack = -1e-10
    # AM-GM on the eigenvalues of W Q^-1; reduces to 2 sqrt(s) for W = I.
    chain_ok = (
        c_s - 2.0 * math.sqrt(w.det * s) >= slack
        and c_h - c_s >= slack
        and 2.0 * c_s - c_h >= slack
    )
    sequential_ge_holevo = min(k1, k2) - c_h >= slack
    return BoundsReport(
        c_s=c_s, c_h=c_h, c_n=c_n, c_r=c_r, k1=k1, k2=k2,
        scalars=scalars, weight=w, config=cfg,
        sloppy=False, weak_compatible=weak,
        chain_ok=chain_ok, sequential_ge_holevo=sequential_ge_holevo,
    )
