"""Landscape analysis and global maximization of the QFIM determinant.

The determinant factorizes as det Q = 64 Z^2 sin^2(alpha), so the
landscape is the squared scrambling amplitude Z^2 over (gamma, theta, f)
times a probe factor.  Z^2 has minima (value 0) where the scrambler is
trivial or misaligned and a maximum manifold at Z^2 = 1/4; the classifier
below names the standard stationary cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize as sciopt

from . import rng
from .bounds import WeightMatrix, holevo_nagaoka_bound, sld_bound
from .core import EncodingConfig
from .fisher import qfim_closed_form

#: Search box for (alpha, gamma, theta, f).
SEARCH_LOWER = np.array([0.0, 0.0, 0.0, 0.0])
SEARCH_UPPER = np.array([math.pi, math.pi, math.pi, 2.0 * math.pi])

#: Convergence thresholds for one ascent run.
GRAD_TOL = 1e-10
MAX_ITER = 500

STATIONARY_LABELS = ("case1", "case2", "case3", "case4a", "case4b")


class StationaryClassification(NamedTuple):
    label: str
    matches: tuple[str, ...]


@dataclass(frozen=True)
class LandscapePoint:
    """One scrambler setting with its landscape value and gradient."""

    gamma: float
    theta: float
    f: float
    z_squared: float
    gradient: tuple[float, float, float]


@dataclass(frozen=True)
class OptimumReport:
    """Best configuration found by the multi-start determinant maximization."""

    alpha: float
    gamma: float
    theta: float
    f: float
    det_q: float
    s: float
    c_s: float
    c_h: float
    stationary_case: str
    starts_used: int
    seed: int


def z_value(gamma: float, theta: float, f: float) -> float:
    """Z = sin(g) sin(t) (cos(f) cos(g) - sin(g) cos(t) sin(f))."""
    return (
        math.sin(gamma)
        * math.sin(theta)
        * (math.cos(f) * math.cos(gamma) - math.sin(gamma) * math.cos(theta) * math.sin(f))
    )


def z_squared(gamma: float, theta: float, f: float) -> float:
    """Squared scrambling amplitude, bounded by 1/4."""
    return z_value(gamma, theta, f) ** 2


def _case4_factors(gamma: float, theta: float, f: float) -> tuple[float, float, float]:
    """The three bracketed factors whose joint zero marks a Z^2 maximum."""
    sg, cg = math.sin(gamma), math.cos(gamma)
    st, ct = math.sin(theta), math.cos(theta)
    sf, cf = math.sin(f), math.cos(f)
    factor_gamma = cf * (cg * cg - sg * sg) - 2.0 * sg * cg * ct * sf
    factor_theta = cf * cg * ct - sg * sf * (ct * ct - st * st)
    factor_f = cg * sf + sg * ct * cf
    return factor_gamma, factor_theta, factor_f


def z_squared_gradient(gamma: float, theta: float, f: float) -> np.ndarray:
    """Analytic gradient of Z^2 with respect to (gamma, theta, f)."""
    sg = math.sin(gamma)
    st, ct = math.sin(theta), math.cos(theta)
    sf, cf = math.sin(f), math.cos(f)
    zin = cf * math.cos(gamma) - sg * ct * sf  # Z / (sin g sin t)
    fg, ft, ff = _case4_factors(gamma, theta, f)
    return np.array(
        [
            2.0 * st * st * sg * zin * fg,
            2.0 * sg * sg * st * zin * ft,
            -2.0 * sg * sg * st * st * zin * ff,
        ]
    )


def landscape_point(gamma: float, theta: float, f: float) -> LandscapePoint:
    return LandscapePoint(
        gamma=gamma,
        theta=theta,
        f=f,
        z_squared=z_squared(gamma, theta, f),
        gradient=tuple(z_squared_gradient(gamma, theta, f)),
    )


def classify_stationary(
    gamma: float, theta: float, f: float, tol: float = 1e-8
) -> StationaryClassification:
    """Name the stationary case at a point (or ``non-stationary``).

    Minima of Z^2 (value 0): case1 sin(g) = 0, case2 sin(t) = 0,
    case3 cos(g) cos(f) = sin(g) cos(t) sin(f).  Maxima (value 1/4):
    case4, split into case4a (Z = -1/2 branch) and case4b (Z = +1/2
    branch).  Multiple matches are resolved by priority 1, 2, 3, 4,
    with every matching label reported.
    """
    grad = z_squared_gradient(gamma, theta, f)
    if float(np.linalg.norm(grad)) > tol:
        return StationaryClassification("non-stationary", ())

    matches: list[str] = []
    if abs(math.sin(gamma)) <= tol:
        matches.append("case1")
    if abs(math.sin(theta)) <= tol:
        matches.append("case2")
    zin = math.cos(gamma) * math.cos(f) - math.sin(gamma) * math.cos(theta) * math.sin(f)
    if abs(zin) <= tol:
        matches.append("case3")
    if max(abs(r) for r in _case4_factors(gamma, theta, f)) <= tol:
        matches.append("case4a" if z_value(gamma, theta, f) <= 0.0 else "case4b")
    if not matches:
        return StationaryClassification("non-stationary", ())
    return StationaryClassification(matches[0], tuple(matches))


def _det_and_gradient(x: np.ndarray) -> tuple[float, np.ndarray]:
    """det Q = 64 Z^2 sin^2(alpha) and its gradient over (alpha, g, t, f)."""
    alpha, gamma, theta, f = x
    sa = math.sin(alpha)
    zsq = z_squared(gamma, theta, f)
    value = 64.0 * zsq * sa * sa
    grad = np.empty(4)
    grad[0] = 64.0 * zsq * math.sin(2.0 * alpha)
    grad[1:] = 64.0 * sa * sa * z_squared_gradient(gamma, theta, f)
    return value, grad


def _ascend(x0: np.ndarray, free: np.ndarray) -> tuple[float, np.ndarray]:
    """Projected gradient ascent with a Barzilai-Borwein step and backtracking.

    Coordinates where ``free`` is False are held fixed.  Falls back to a
    bounded Nelder-Mead polish when the line search stalls before the
    gradient tolerance is met.
    """
    lower, upper = SEARCH_LOWER, SEARCH_UPPER
    x = np.clip(x0, lower, upper)
    value, grad = _det_and_gradient(x)
    grad = np.where(free, grad, 0.0)
    step = 0.1
    prev_x = None
    prev_grad = None

    for _ in range(MAX_ITER):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= GRAD_TOL:
            return value, x
        if prev_x is not None:
            dx = x - prev_x
            dg = grad - prev_grad
            denom = -float(dx @ dg)  # ascent: curvature along the step
            step = float(dx @ dx) / denom if denom > 0.0 else 0.1
            step = min(max(step, 1e-12), 1e3)
        # Backtracking on the projected step until the value improves.
        improved = False
        trial_step = step
        for _ in range(60):
            x_new = np.clip(x + trial_step * grad, lower, upper)
            value_new, grad_new = _det_and_gradient(x_new)
            if value_new > value or np.array_equal(x_new, x):
                improved = True
                break
            trial_step *= 0.5
        if not improved or np.array_equal(x_new, x):
            break
        prev_x, prev_grad = x, grad
        x, value = x_new, value_new
        grad = np.where(free, grad_new, 0.0)

    # Stalled: derivative-free simplex polish on the free coordinates.
    free_idx = np.flatnonzero(free)
    if free_idx.size == 0:
        return value, x

    def negated(xf: np.ndarray) -> float:
        full = x.copy()
        full[free_idx] = xf
        return -_det_and_gradient(full)[0]

    result = sciopt.minimize(
        negated,
        x[free_idx],
        method="Nelder-Mead",
        bounds=[(lower[i], upper[i]) for i in free_idx],
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
    )
    if -result.fun > value:
        x = x.copy()
        x[free_idx] = result.x
        value = -result.fun
    return value, x


def maximize_det_qfim(
    n_starts: int, seed: int, fixed: dict[str, float] | None = None
) -> OptimumReport:
    """Multi-start ascent of det Q over (alpha, gamma, theta, f).

    ``fixed`` pins a subset of the variables (e.g. ``{"gamma": 0.0}``) to
    explore restricted slices.  Starts are drawn from counter-based
    streams keyed by (seed, start index); the argmax over starts breaks
    ties toward the lowest start index, so the result is deterministic
    for a fixed seed regardless of execution order.
    """
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts!r}")
    names = ("alpha", "gamma", "theta", "f")
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(names)
    if unknown:
        raise ValueError(f"unknown fixed variables: {sorted(unknown)}")
    free = np.array([name not in fixed for name in names])

    best_value = -math.inf
    best_x = None
    for start in range(n_starts):
        x0 = rng.stream(seed, start).uniform(SEARCH_LOWER, SEARCH_UPPER)
        for i, name in enumerate(names):
            if name in fixed:
                x0[i] = fixed[name]
        value, x = _ascend(x0, free)
        if value > best_value:
            best_value, best_x = value, x

    alpha, gamma, theta, f = (float(v) for v in best_x)
    classification = classify_stationary(gamma, theta, f, tol=1e-6)
    # Config realizing the effective phase f directly: beta = lambdas = 0,
    # phi = -f.
    cfg = EncodingConfig(
        alpha=alpha, beta=0.0, gamma=gamma, theta=theta, phi=-f,
        lambda1=0.0, lambda2=0.0,
    )
    q, _ = qfim_closed_form(cfg)
    det_q = q.det
    if det_q > 1e-12:
        w = WeightMatrix.identity()
        s = 1.0 / det_q
        c_s = sld_bound(q, w)
        c_h = holevo_nagaoka_bound(q, w)
    else:
        s = math.inf
        c_s = math.inf
        c_h = math.inf
    return OptimumReport(
        alpha=alpha, gamma=gamma, theta=theta, f=f,
        det_q=det_q, s=s, c_s=c_s, c_h=c_h,
        stationary_case=classification.label,
        starts_used=n_starts, seed=seed,
    )
