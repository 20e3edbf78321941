"""POVM measurements, classical Fisher information, and Monte-Carlo estimation.

Covers the full simulation layer: POVM validation and construction, outcome
statistics, the numerical Nagaoka-bound search over single-copy POVMs,
maximum-likelihood estimation from sampled counts, and the two-step
sequential strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as sciopt

from . import rng
from .bounds import SingularModelError, WeightMatrix, hierarchy_report
from .core import DET_EPS, IDENTITY, PAULI_X, PAULI_Y, PAULI_Z, EncodingConfig, encode, encode_derivatives
from .fisher import QfimMatrix, qfim_closed_form, sld_operators
from .measurement_errors import (
    DegenerateLikelihoodError,
    IllConditionedError,
    NotCompleteError,
    NotPositiveError,
    SearchFailedError,
)

#: Outcome probabilities below this are treated as exactly zero.
PROB_EPS = 1e-12

#: Probability-derivative magnitude that makes a vanishing outcome ill-conditioned.
DPROB_EPS = 1e-10

#: Objective value assigned to invalid candidates during POVM searches.
SEARCH_PENALTY = 1e12


@dataclass(frozen=True)
class Povm:
    """Positive operator-valued measure: PSD elements summing to identity."""

    elements: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        frozen = []
        for el in self.elements:
            arr = np.array(el, dtype=complex)
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "elements", tuple(frozen))
        if len(self.labels) != len(self.elements):
            raise ValueError("one label per element required")

    def __len__(self) -> int:
        return len(self.elements)


def make_povm(elements, labels=None) -> Povm:
    """Build a Povm from 2x2 arrays, generating outcome labels if absent."""
    elements = tuple(np.asarray(el, dtype=complex) for el in elements)
    if labels is None:
        labels = tuple(f"k{i}" for i in range(len(elements)))
    return Povm(elements=elements, labels=tuple(labels))


def validate_povm(povm: Povm, tol: float = 1e-10) -> Povm:
    """Check positivity and completeness; return the POVM unchanged.

    Raises :class:`NotPositiveError` naming the offending element or
    :class:`NotCompleteError` with the residual norm.
    """
    if not (2 <= len(povm) <= 8):
        raise ValueError(f"POVM must have 2..8 elements, got {len(povm)}")
    total = np.zeros((2, 2), dtype=complex)
    for k, el in enumerate(povm.elements):
        if el.shape != (2, 2):
            raise ValueError(f"element {k} is not 2x2")
        hermiticity = float(np.max(np.abs(el - el.conj().T)))
        if hermiticity > tol:
            raise NotPositiveError(
                f"element {k} is not Hermitian (deviation {hermiticity:.3e})"
            )
        min_eig = float(np.linalg.eigvalsh(el)[0])
        if min_eig < -tol:
            raise NotPositiveError(
                f"element {k} has negative eigenvalue {min_eig:.3e}"
            )
        total += el
    residual = float(np.max(np.abs(total - IDENTITY)))
    if residual > tol:
        raise NotCompleteError(
            f"elements sum to identity only within {residual:.3e} (tol {tol:.1e})"
        )
    return povm


def bloch_element(weight: float, direction) -> np.ndarray:
    """Rank-one POVM element weight * (I + n.sigma)/2 for unit Bloch vector n."""
    n = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(n))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"Bloch direction must have unit norm, got |n| = {norm!r}")
    n = n / norm
    return weight * 0.5 * (IDENTITY + n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z)


def povm_from_bloch(weights, directions, labels=None) -> Povm:
    """POVM from Bloch weights/directions; validates the result."""
    elements = [bloch_element(w, n) for w, n in zip(weights, directions)]
    return validate_povm(make_povm(elements, labels))


def projective_povm(basis_vectors, labels=None) -> Povm:
    """Projective POVM onto an orthonormal pair of state vectors."""
    elements = []
    for v in basis_vectors:
        v = np.asarray(v, dtype=complex)
        elements.append(np.outer(v, v.conj()))
    return validate_povm(make_povm(elements, labels))


def z_basis_povm() -> Povm:
    return projective_povm([np.array([1.0, 0.0]), np.array([0.0, 1.0])], ("z+", "z-"))


def x_basis_povm() -> Povm:
    inv = 1.0 / math.sqrt(2.0)
    return projective_povm(
        [np.array([inv, inv]), np.array([inv, -inv])], ("x+", "x-")
    )


def sic_povm() -> Povm:
    """Symmetric four-outcome POVM on the tetrahedron of Bloch directions."""
    directions = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    ) / math.sqrt(3.0)
    return povm_from_bloch([0.5] * 4, directions, ("t0", "t1", "t2", "t3"))


def sld_eigenbasis_povm(cfg: EncodingConfig, parameter: int) -> Povm:
    """Projective measurement in the eigenbasis of the SLD for one parameter.

    Optimal for single-parameter estimation of lambda1 (parameter=1) or
    lambda2 (parameter=2) at the reference configuration.
    """
    if parameter not in (1, 2):
        raise ValueError(f"parameter must be 1 or 2, got {parameter!r}")
    psi, dpsi1, dpsi2 = encode_derivatives(cfg)
    sld = sld_operators(psi, dpsi1, dpsi2)[parameter - 1]
    _, vecs = np.linalg.eigh(sld)
    return projective_povm([vecs[:, 0], vecs[:, 1]], ("sld-", "sld+"))


def povm_from_spec(doc: dict) -> Povm:
    """Parse the wire format: {"elements": [...]} with Bloch or matrix entries.

    Bloch entries are {"weight": w, "direction": [nx, ny, nz]} with
    w in (0, 1] and |n| = 1, meaning w (I + n.sigma)/2.  Matrix entries
    are {"matrix": [[re, im], ...]} listing the four entries row-major.
    """
    if "elements" not in doc:
        raise ValueError('POVM document must have an "elements" list')
    elements = []
    labels = []
    for k, entry in enumerate(doc["elements"]):
        if "matrix" in entry:
            pairs = entry["matrix"]
            if len(pairs) != 4:
                raise ValueError(
                    f"element {k}: matrix form needs 4 row-major [re, im] pairs"
                )
            flat = [complex(re, im) for re, im in pairs]
            elements.append(np.array(flat, dtype=complex).reshape(2, 2))
        elif "weight" in entry and "direction" in entry:
            w = float(entry["weight"])
            if not (0.0 < w <= 1.0):
                raise ValueError(f"element {k}: weight must be in (0, 1], got {w!r}")
            elements.append(bloch_element(w, entry["direction"]))
        else:
            raise ValueError(
                f'element {k} needs either "matrix" or "weight"+"direction"'
            )
        labels.append(str(entry.get("label", f"k{k}")))
    return validate_povm(make_povm(elements, labels))


def povm_to_spec(povm: Povm) -> dict:
    """Serialize a POVM to the matrix wire format (lossless round trip)."""
    entries = []
    for el, label in zip(povm.elements, povm.labels):
        pairs = [[float(z.real), float(z.imag)] for z in el.reshape(-1)]
        entries.append({"matrix": pairs, "label": label})
    return {"elements": entries}


def _raw_probabilities(psi: np.ndarray, elements) -> np.ndarray:
    return np.array(
        [float(np.vdot(psi, el @ psi).real) for el in elements]
    )


def outcome_probabilities(psi: np.ndarray, povm: Povm) -> np.ndarray:
    """Born-rule outcome probabilities <psi|Pi_k|psi>.

    Entries in [-1e-12, 0) are clamped to zero; larger violations mean the
    POVM is invalid and raise.
    """
    psi = np.asarray(psi, dtype=complex)
    norm_dev = abs(float(np.vdot(psi, psi).real) - 1.0)
    if norm_dev > 1e-9:
        raise ValueError(f"state is not normalized (deviation {norm_dev:.3e})")
    probs = _raw_probabilities(psi, povm.elements)
    if np.min(probs) < -PROB_EPS:
        raise NotPositiveError(
            f"outcome {int(np.argmin(probs))} has probability {np.min(probs):.3e}"
        )
    probs = np.clip(probs, 0.0, None)
    if abs(float(np.sum(probs)) - 1.0) > 1e-10:
        raise NotCompleteError(
            f"probabilities sum to {float(np.sum(probs))!r}, not 1"
        )
    return probs


@dataclass(frozen=True)
class ClassicalFim:
    """Symmetric 2x2 classical Fisher information matrix for one POVM."""

    f11: float
    f12: float
    f22: float

    @property
    def det(self) -> float:
        return self.f11 * self.f22 - self.f12 * self.f12

    def as_array(self) -> np.ndarray:
        return np.array([[self.f11, self.f12], [self.f12, self.f22]])


def _fim_from_states(psi, dpsi1, dpsi2, elements) -> ClassicalFim:
    f11 = f12 = f22 = 0.0
    for k, el in enumerate(elements):
        el_psi = el @ psi
        p = float(np.vdot(psi, el_psi).real)
        dp1 = 2.0 * float(np.vdot(dpsi1, el_psi).real)
        dp2 = 2.0 * float(np.vdot(dpsi2, el_psi).real)
        if p <= PROB_EPS:
            if max(abs(dp1), abs(dp2)) > DPROB_EPS:
                raise IllConditionedError(
                    f"outcome {k}: probability {p:.3e} vanishes but its "
                    f"derivative does not ({dp1:.3e}, {dp2:.3e})"
                )
            continue
        f11 += dp1 * dp1 / p
        f12 += dp1 * dp2 / p
        f22 += dp2 * dp2 / p
    return ClassicalFim(f11=f11, f12=f12, f22=f22)


def classical_fim(cfg: EncodingConfig, povm: Povm) -> ClassicalFim:
    """Classical Fisher information F_mn = sum_k dp_m dp_n / p_k.

    Probability derivatives are analytic, dp_m = 2 Re <d_m psi|Pi_k|psi>.
    Outcomes with vanishing probability and vanishing derivative are
    skipped; a vanishing probability with non-vanishing derivative raises
    :class:`IllConditionedError`.
    """
    psi, dpsi1, dpsi2 = encode_derivatives(cfg)
    return _fim_from_states(psi, dpsi1, dpsi2, povm.elements)


# ---------------------------------------------------------------------------
# Numerical Nagaoka bound: search over rank-one POVM families
# ---------------------------------------------------------------------------


def _povm_elements_from_params(x: np.ndarray, n_outcomes: int):
    """Decode raw parameters into rank-one elements plus the completing one.

    Each free outcome contributes (u, polar, azimuth) with weight u^2 and a
    unit Bloch direction; the final element is I - sum(others).  Returns
    (elements, psd_violation); violation > 0 means the completion failed.
    """
    elements = []
    total = np.zeros((2, 2), dtype=complex)
    for k in range(n_outcomes - 1):
        u, polar, azimuth = x[3 * k : 3 * k + 3]
        weight = u * u
        n = (
            math.sin(polar) * math.cos(azimuth),
            math.sin(polar) * math.sin(azimuth),
            math.cos(polar),
        )
        el = weight * 0.5 * (
            IDENTITY + n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
        )
        elements.append(el)
        total += el
    last = IDENTITY - total
    violation = max(0.0, -float(np.linalg.eigvalsh(last)[0]))
    elements.append(last)
    return elements, violation


def _search_povm(
    states: tuple[np.ndarray, np.ndarray, np.ndarray],
    objective,
    n_starts: int,
    seed: int,
    outcome_counts=(2, 3, 4),
):
    """Minimize ``objective(ClassicalFim)`` over rank-one POVM families.

    Runs ``n_starts`` Nelder-Mead searches for each outcome count.  Invalid
    candidates (non-PSD completion, singular or ill-conditioned Fisher
    matrix) receive a large finite penalty so the search can move off them.
    """
    psi, dpsi1, dpsi2 = states

    def cost(x: np.ndarray, n_outcomes: int) -> float:
        elements, violation = _povm_elements_from_params(x, n_outcomes)
        if violation > 1e-12:
            return SEARCH_PENALTY * (1.0 + violation)
        try:
            fim = _fim_from_states(psi, dpsi1, dpsi2, elements)
        except IllConditionedError:
            return SEARCH_PENALTY
        if fim.det <= DET_EPS:
            return SEARCH_PENALTY
        return objective(fim)

    best = math.inf
    best_x = None
    best_m = None
    for m in outcome_counts:
        dim = 3 * (m - 1)
        for start in range(n_starts):
            gen = rng.stream(seed, m, start)
            x0 = np.empty(dim)
            for k in range(m - 1):
                x0[3 * k] = math.sqrt(2.0 / m) * gen.uniform(0.7, 1.3)
                x0[3 * k + 1] = math.acos(gen.uniform(-1.0, 1.0))
                x0[3 * k + 2] = gen.uniform(0.0, 2.0 * math.pi)
            result = sciopt.minimize(
                cost,
                x0,
                args=(m,),
                method="Nelder-Mead",
                options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000, "maxfev": 4000},
            )
            if result.fun < best:
                best = float(result.fun)
                best_x = result.x
                best_m = m

    if best_x is None or best >= SEARCH_PENALTY:
        raise SearchFailedError(
            "every candidate POVM produced a singular Fisher matrix"
        )
    elements, _ = _povm_elements_from_params(best_x, best_m)
    return best, validate_povm(make_povm(elements), tol=1e-8)


def nagaoka_numeric(
    cfg: EncodingConfig,
    w: WeightMatrix,
    n_starts: int,
    seed: int,
    outcome_counts=(2, 3, 4),
) -> tuple[float, Povm]:
    """Minimize Tr[W F^-1] over single-copy POVMs with 2..4 outcomes.

    Returns the best value found and the POVM attaining it.  The value
    upper-bounds the closed-form Nagaoka bound; it never falls below it.
    """
    q, _ = qfim_closed_form(cfg)
    if q.det <= DET_EPS:
        raise SingularModelError(
            f"QFIM is singular (det = {q.det:.3e}): Nagaoka search undefined"
        )

    def weighted_inverse_trace(fim: ClassicalFim) -> float:
        return (
            w.w11 * fim.f22 - 2.0 * w.w12 * fim.f12 + w.w22 * fim.f11
        ) / fim.det

    states = encode_derivatives(cfg)
    return _search_povm(states, weighted_inverse_trace, n_starts, seed, outcome_counts)


def lambda1_optimal_povm(
    cfg: EncodingConfig, n_starts: int, seed: int
) -> tuple[float, Povm]:
    """POVM minimizing the marginal variance bound [F^-1]_11 for lambda1."""
    q, _ = qfim_closed_form(cfg)
    if q.det <= DET_EPS:
        raise SingularModelError(
            f"QFIM is singular (det = {q.det:.3e}): no lambda1-optimal POVM"
        )

    def inverse_11(fim: ClassicalFim) -> float:
        return fim.f22 / fim.det

    states = encode_derivatives(cfg)
    return _search_povm(states, inverse_11, n_starts, seed)


# ---------------------------------------------------------------------------
# Sampling and maximum-likelihood estimation
# ---------------------------------------------------------------------------


def _sample_counts(probs: np.ndarray, shots: int, gen: np.random.Generator) -> np.ndarray:
    return gen.multinomial(shots, probs / float(np.sum(probs)))


def sample_outcomes(probs, shots: int, seed: int) -> np.ndarray:
    """Multinomial outcome counts, deterministic per seed."""
    probs = np.asarray(probs, dtype=float)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots!r}")
    if np.min(probs) < -PROB_EPS or abs(float(np.sum(probs)) - 1.0) > 1e-9:
        raise ValueError("probs is not a probability distribution")
    return _sample_counts(np.clip(probs, 0.0, None), shots, rng.stream(seed))


def _log_likelihood(cfg, elements, counts, l1, l2) -> float:
    psi = encode(cfg.replace(lambda1=l1, lambda2=l2))
    total = 0.0
    for k, el in enumerate(elements):
        if counts[k] == 0:
            continue
        p = float(np.vdot(psi, el @ psi).real)
        total += counts[k] * math.log(max(p, 1e-300))
    return total


def _loglik_hessian(loglik, x1: float, x2: float, h: float = 1e-3) -> np.ndarray:
    center = loglik(x1, x2)
    h11 = (loglik(x1 + h, x2) - 2.0 * center + loglik(x1 - h, x2)) / (h * h)
    h22 = (loglik(x1, x2 + h) - 2.0 * center + loglik(x1, x2 - h)) / (h * h)
    h12 = (
        loglik(x1 + h, x2 + h)
        - loglik(x1 + h, x2 - h)
        - loglik(x1 - h, x2 + h)
        + loglik(x1 - h, x2 - h)
    ) / (4.0 * h * h)
    return np.array([[h11, h12], [h12, h22]])


def _check_joint_curvature(hessian: np.ndarray, shots: int) -> None:
    eigs = np.linalg.eigvalsh(hessian)  # ascending; for a max both <= 0
    strongest = abs(float(eigs[0]))
    weakest = abs(float(eigs[1]))
    if strongest <= 1e-9 * max(shots, 1) or weakest <= 1e-6 * strongest:
        raise DegenerateLikelihoodError(
            f"likelihood is flat along a direction "
            f"(curvatures {eigs[0]:.3e}, {eigs[1]:.3e})"
        )


def mle_estimate(
    cfg: EncodingConfig,
    povm: Povm,
    counts,
    box_halfwidth: float = 0.5,
    grid_points: int = 50,
    refine: bool = True,
) -> tuple[float, float]:
    """Maximum-likelihood estimate of (lambda1, lambda2) from counts.

    Searches the box of half-width ``box_halfwidth`` around the reference
    parameters in ``cfg``: coarse grid first, then a bounded simplex
    refinement to 1e-8 in log-likelihood.  Raises
    :class:`DegenerateLikelihoodError` when the likelihood is flat along
    some direction (e.g. a sloppy model).
    """
    counts = np.asarray(counts)
    shots = int(np.sum(counts))
    l1_ref, l2_ref = cfg.lambda1, cfg.lambda2
    lo1, hi1 = l1_ref - box_halfwidth, l1_ref + box_halfwidth
    lo2, hi2 = l2_ref - box_halfwidth, l2_ref + box_halfwidth
    elements = povm.elements

    def loglik(l1, l2):
        return _log_likelihood(cfg, elements, counts, l1, l2)

    grid1 = np.linspace(lo1, hi1, grid_points)
    grid2 = np.linspace(lo2, hi2, grid_points)
    values = np.array([[loglik(a, b) for b in grid2] for a in grid1])
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best = (float(grid1[i]), float(grid2[j]))

    if refine:
        result = sciopt.minimize(
            lambda x: -loglik(x[0], x[1]),
            np.array(best),
            method="Nelder-Mead",
            bounds=[(lo1, hi1), (lo2, hi2)],
            options={"xatol": 1e-10, "fatol": 1e-8, "maxiter": 500},
        )
        best = (float(result.x[0]), float(result.x[1]))

    _check_joint_curvature(_loglik_hessian(loglik, *best), shots)
    return best


def profile_mle_lambda1(
    cfg: EncodingConfig,
    povm: Povm,
    counts,
    box_halfwidth: float = 0.5,
    grid_points: int = 50,
    refine: bool = True,
) -> float:
    """Profile-likelihood estimate of lambda1 with lambda2 as a nuisance.

    Maximizes jointly and returns the lambda1 component; degeneracy is
    judged on the profile curvature (Schur complement of the joint
    Hessian), so a flat nuisance direction alone does not fail.
    """
    counts = np.asarray(counts)
    shots = int(np.sum(counts))
    l1_ref, l2_ref = cfg.lambda1, cfg.lambda2
    lo1, hi1 = l1_ref - box_halfwidth, l1_ref + box_halfwidth
    lo2, hi2 = l2_ref - box_halfwidth, l2_ref + box_halfwidth
    elements = povm.elements

    def loglik(l1, l2):
        return _log_likelihood(cfg, elements, counts, l1, l2)

    grid1 = np.linspace(lo1, hi1, grid_points)
    grid2 = np.linspace(lo2, hi2, grid_points)
    values = np.array([[loglik(a, b) for b in grid2] for a in grid1])
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best = (float(grid1[i]), float(grid2[j]))

    if refine:
        result = sciopt.minimize(
            lambda x: -loglik(x[0], x[1]),
            np.array(best),
            method="Nelder-Mead",
            bounds=[(lo1, hi1), (lo2, hi2)],
            options={"xatol": 1e-10, "fatol": 1e-8, "maxiter": 500},
        )
        best = (float(result.x[0]), float(result.x[1]))

    hessian = _loglik_hessian(loglik, *best)
    scale = max(float(np.max(np.abs(hessian))), 1e-9 * max(shots, 1))
    h11, h12, h22 = hessian[0, 0], hessian[0, 1], hessian[1, 1]
    if abs(h22) > 1e-9 * scale:
        profile_curvature = h11 - h12 * h12 / h22
    else:
        profile_curvature = h11
    if abs(profile_curvature) <= 1e-6 * scale:
        raise DegenerateLikelihoodError(
            f"profile likelihood for lambda1 is flat "
            f"(curvature {profile_curvature:.3e}, scale {scale:.3e})"
        )
    return best[0]


def mle_lambda2_given_lambda1(
    cfg: EncodingConfig,
    povm: Povm,
    counts,
    lambda1_value: float,
    box_halfwidth: float = 0.5,
    grid_points: int = 50,
    refine: bool = True,
) -> float:
    """One-dimensional MLE of lambda2 with lambda1 held fixed."""
    counts = np.asarray(counts)
    shots = int(np.sum(counts))
    lo2, hi2 = cfg.lambda2 - box_halfwidth, cfg.lambda2 + box_halfwidth
    elements = povm.elements

    def loglik(l2):
        return _log_likelihood(cfg, elements, counts, lambda1_value, l2)

    grid2 = np.linspace(lo2, hi2, grid_points)
    values = np.array([loglik(b) for b in grid2])
    best = float(grid2[int(np.argmax(values))])

    if refine:
        result = sciopt.minimize_scalar(
            lambda x: -loglik(x),
            bounds=(lo2, hi2),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if -result.fun >= loglik(best):
            best = float(result.x)

    h = 1e-3
    curvature = (loglik(best + h) - 2.0 * loglik(best) + loglik(best - h)) / (h * h)
    if abs(curvature) <= 1e-9 * max(shots, 1):
        raise DegenerateLikelihoodError(
            f"likelihood for lambda2 is flat (curvature {curvature:.3e})"
        )
    return best


# ---------------------------------------------------------------------------
# Monte-Carlo experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McExperiment:
    """One Monte-Carlo estimation experiment (repeated sample-and-estimate)."""

    cfg: EncodingConfig
    povm: Povm
    shots_per_repeat: int
    repeats: int
    seed: int
    estimator: str = "mle-refined"

    def __post_init__(self):
        if self.shots_per_repeat < 100:
            raise ValueError("shots_per_repeat must be >= 100")
        if self.repeats < 10:
            raise ValueError("repeats must be >= 10")
        if self.estimator not in ("mle-grid", "mle-refined"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class McReport:
    """Empirical covariance of the estimates against the per-shot bounds."""

    covariance: tuple[tuple[float, float], tuple[float, float]]
    scaled_total_variance: float
    c_s: float
    c_h: float
    bias: tuple[float, float]
    shots_per_repeat: int
    repeats_used: int
    repeats_failed: int
    seed: int


def monte_carlo_covariance(exp: McExperiment) -> McReport:
    """Run ``repeats`` independent (sample, estimate) rounds.

    The scaled total variance M (Var l1 + Var l2) is directly comparable
    to the per-shot bounds reported alongside.  Repeats whose estimator
    fails (degenerate likelihood) are counted and excluded.  Output is
    deterministic for a fixed seed.
    """
    validate_povm(exp.povm)
    psi = encode(exp.cfg)
    probs = outcome_probabilities(psi, exp.povm)
    refine = exp.estimator == "mle-refined"

    estimates = []
    failed = 0
    for repeat in range(exp.repeats):
        counts = _sample_counts(probs, exp.shots_per_repeat, rng.stream(exp.seed, repeat))
        try:
            estimates.append(mle_estimate(exp.cfg, exp.povm, counts, refine=refine))
        except DegenerateLikelihoodError:
            failed += 1

    report = hierarchy_report(exp.cfg)
    if len(estimates) >= 2:
        arr = np.asarray(estimates)
        cov = np.cov(arr, rowvar=False, ddof=1)
        bias = arr.mean(axis=0) - np.array([exp.cfg.lambda1, exp.cfg.lambda2])
        scaled = exp.shots_per_repeat * float(cov[0, 0] + cov[1, 1])
        cov_tuple = (
            (float(cov[0, 0]), float(cov[0, 1])),
            (float(cov[1, 0]), float(cov[1, 1])),
        )
        bias_tuple = (float(bias[0]), float(bias[1]))
    else:
        cov_tuple = ((math.nan, math.nan), (math.nan, math.nan))
        bias_tuple = (math.nan, math.nan)
        scaled = math.nan
    return McReport(
        covariance=cov_tuple,
        scaled_total_variance=scaled,
        c_s=report.c_s,
        c_h=report.c_h,
        bias=bias_tuple,
        shots_per_repeat=exp.shots_per_repeat,
        repeats_used=len(estimates),
        repeats_failed=failed,
        seed=exp.seed,
    )


@dataclass(frozen=True)
class SequentialReport:
    """Variance report for the two-step (estimate lambda1, then lambda2) strategy."""

    var_lambda1: float
    var_lambda2: float
    scaled_total_variance: float
    k1: float
    k2: float
    c_h: float
    allocation: float
    shots_step1: int
    shots_step2: int
    repeats_used: int
    repeats_failed: int
    seed: int


def sequential_experiment(
    cfg: EncodingConfig,
    total_shots: int,
    allocation: float,
    seed: int,
    repeats: int = 200,
    search_starts: int = 12,
) -> SequentialReport:
    """Simulate the two-step strategy and compare against K1.

    Step 1 spends ``allocation * total_shots`` shots estimating lambda1 by
    profile likelihood (lambda2 unknown) with a numerically optimized
    POVM; step 2 estimates lambda2 with lambda1 fixed at the step-1
    estimate, measuring in the lambda2-SLD eigenbasis.  The total variance
    scaled by ``total_shots`` is reported against the sequential bounds.
    """
    if total_shots % 2 != 0 or total_shots < 200:
        raise ValueError("total_shots must be even and >= 200")
    if not (0.0 < allocation < 1.0):
        raise ValueError(f"allocation must lie in (0, 1), got {allocation!r}")
    if repeats < 10:
        raise ValueError("repeats must be >= 10")
    shots1 = int(round(total_shots * allocation))
    shots2 = total_shots - shots1
    if min(shots1, shots2) < 1:
        raise ValueError("allocation leaves a step without shots")

    q, _ = qfim_closed_form(cfg)
    sloppy = q.det <= DET_EPS
    if sloppy:
        # No lambda1-optimal POVM exists; use a fixed informative POVM so
        # the estimator can report the degeneracy.
        step1_povm = sic_povm()
        k1 = k2 = math.inf
        c_h = math.inf
    else:
        _, step1_povm = lambda1_optimal_povm(cfg, n_starts=search_starts, seed=seed)
        report = hierarchy_report(cfg)
        k1, k2, c_h = report.k1, report.k2, report.c_h
    step2_povm = sld_eigenbasis_povm(cfg, parameter=2)

    psi = encode(cfg)
    probs1 = outcome_probabilities(psi, step1_povm)
    probs2 = outcome_probabilities(psi, step2_povm)

    estimates = []
    failed = 0
    for repeat in range(repeats):
        counts1 = _sample_counts(probs1, shots1, rng.stream(seed, repeat, 0))
        counts2 = _sample_counts(probs2, shots2, rng.stream(seed, repeat, 1))
        try:
            l1_hat = profile_mle_lambda1(cfg, step1_povm, counts1)
            l2_hat = mle_lambda2_given_lambda1(cfg, step2_povm, counts2, l1_hat)
        except DegenerateLikelihoodError:
            failed += 1
            continue
        estimates.append((l1_hat, l2_hat))

    if len(estimates) >= 2:
        arr = np.asarray(estimates)
        var1 = float(np.var(arr[:, 0], ddof=1))
        var2 = float(np.var(arr[:, 1], ddof=1))
        scaled = total_shots * (var1 + var2)
    else:
        var1 = var2 = scaled = math.nan
    return SequentialReport(
        var_lambda1=var1,
        var_lambda2=var2,
        scaled_total_variance=scaled,
        k1=k1,
        k2=k2,
        c_h=c_h,
        allocation=allocation,
        shots_step1=shots1,
        shots_step2=shots2,
        repeats_used=len(estimates),
        repeats_failed=failed,
        seed=seed,
    )
