"""
Statistical back end: Fock-weight reconstruction, Bayesian posteriors, threshold
discrimination, the Elitzur-Vaidman figure of merit and the loss-rate fit.
"""
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import bisect, curve_fit

from zenoifm.errors import (
    DegenerateFitError,
    EMMonotonicityError,
    EmptySampleError,
    InvalidParameterError,
    NoCrossingError,
    OutOfSupportError,
)
from zenoifm.homodyne import MIN_QUADRATURE_BOUND, HomodyneDistribution, samples_to_array
from zenoifm.models import (
    DetectionModel,
    DiscriminationReport,
    FockWeights,
    Posteriors,
    ReconstructionResult,
    RescaledSample,
)
from zenoifm.utils import make_rng

logger = logging.getLogger(__name__)

EM_TOL = 1e-8
EM_MAX_ITERS = 10_000
EM_MONOTONE_SLACK = 1e-9  # relative; absorbs float rounding between iterations
BOOTSTRAP_PERCENTILES = (16.0, 84.0)
QUAD_TOL = 1e-10


# -- densities -------------------------------------------------------------------------

class QuadratureDensity:
    """A bare pdf callable with P(|x| <= L) from adaptive composite Simpson quadrature."""

    def __init__(self, pdf: Callable, bound: float = MIN_QUADRATURE_BOUND, tol: float = QUAD_TOL,
                 max_level: int = 18):
        self._pdf = pdf
        self.support_bound = bound
        self.tol = tol
        self.max_level = max_level

    def pdf(self, x):
        return self._pdf(x)

    def __call__(self, x):
        return self._pdf(x)

    def central_mass(self, L: float) -> float:
        if L < 0:
            raise InvalidParameterError("threshold must be nonnegative")
        if L == 0:
            return 0.0
        return min(1.0, max(0.0, adaptive_simpson(self._pdf, -L, L, self.tol, self.max_level)))


def adaptive_simpson(f: Callable, a: float, b: float, tol: float = QUAD_TOL, max_level: int = 18) -> float:
    """Composite Simpson on 2**k panels, doubling k until successive estimates agree to tol."""
    previous = None
    for level in range(4, max_level + 1):
        grid = np.linspace(a, b, 2 ** level + 1)
        estimate = float(simpson(np.asarray(f(grid), dtype=float), x=grid))
        if previous is not None and abs(estimate - previous) < tol:
            return estimate
        previous = estimate
    logger.warning("Simpson quadrature on [%g, %g] did not reach tolerance %.1e", a, b, tol)
    return previous


def as_density(obj):
    """Objects with central_mass pass through; bare callables get quadrature."""
    if hasattr(obj, "central_mass"):
        return obj
    if callable(obj):
        return QuadratureDensity(obj)
    raise InvalidParameterError(f"{obj!r} is not a density")


def _pdf_of(obj) -> Callable:
    return obj.pdf if hasattr(obj, "pdf") else obj


# -- maximum likelihood ----------------------------------------------------------------

def component_densities(x: np.ndarray, n_max: int, sigma_resc: float) -> np.ndarray:
    """Matrix P[i, k] = noise-convolved density of displaced |k> at sample i."""
    return np.column_stack([
        HomodyneDistribution(FockWeights.fock(k), sigma_resc).pdf(x) for k in range(n_max + 1)
    ])


def _log_likelihood(P: np.ndarray, w: np.ndarray) -> float:
    mix = np.maximum(P @ w, np.finfo(float).tiny)
    return float(np.sum(np.log(mix)))


def _expectation_maximization(P: np.ndarray, w0: np.ndarray, max_iters: int, tol: float):
    """Fixed-component EM on mixture weights. Returns (w, log-likelihood trace, iterations, converged)."""
    tiny = np.finfo(float).tiny
    w = w0.copy()
    ll = _log_likelihood(P, w)
    trace = [ll]
    for iteration in range(1, max_iters + 1):
        mix = np.maximum(P @ w, tiny)
        w_new = w * (P / mix[:, None]).mean(axis=0)
        w_new /= w_new.sum()
        ll_new = _log_likelihood(P, w_new)
        if ll_new < ll - EM_MONOTONE_SLACK * max(1.0, abs(ll)):
            raise EMMonotonicityError(f"log-likelihood fell from {ll:.12g} to {ll_new:.12g} at iteration {iteration}")
        trace.append(ll_new)
        change = float(np.max(np.abs(w_new - w)))
        w, ll = w_new, ll_new
        if change < tol:
            return w, np.array(trace), iteration, True
    return w, np.array(trace), max_iters, False


def _sigma(det: Optional[DetectionModel], use_noise: bool) -> float:
    return det.sigma_rescaled if (det is not None and use_noise) else 0.0


def mle_weights(
    samples,
    n_max: int = 4,
    det: Optional[DetectionModel] = None,
    max_iters: int = EM_MAX_ITERS,
    tol: float = EM_TOL,
    use_noise: bool = True,
) -> ReconstructionResult:
    """
    Maximum-likelihood weights of displaced Fock states 0..n_max by EM from uniform weights.

    Component densities include the detection noise of `det` unless use_noise is False.
    The returned intervals are degenerate; see bootstrap_ci / reconstruct.
    """
    x = samples_to_array(samples)
    if x.size == 0:
        raise EmptySampleError("no samples to reconstruct from")
    if n_max < 0:
        raise InvalidParameterError("n_max must be nonnegative")
    P = component_densities(x, n_max, _sigma(det, use_noise))
    w0 = np.full(n_max + 1, 1.0 / (n_max + 1))
    if n_max == 0:
        w, trace, iterations, converged = w0, np.array([_log_likelihood(P, w0)]), 0, True
    else:
        w, trace, iterations, converged = _expectation_maximization(P, w0, max_iters, tol)
    if not converged:
        logger.warning("EM stopped after %d iterations without reaching tol=%.1e", iterations, tol)
    logger.info("EM: %d samples, n_max=%d, w0=%.4f, %d iterations", x.size, n_max, w[0], iterations)
    weights = FockWeights.normalized(w)
    return ReconstructionResult(
        weights=weights,
        ci_lower=weights.w.copy(),
        ci_upper=weights.w.copy(),
        log_likelihood=float(trace[-1]),
        iterations=iterations,
        converged=converged,
        log_likelihood_trace=trace,
    )


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    lower: np.ndarray
    upper: np.ndarray
    replicates: np.ndarray  # one weight vector per resample


def _bootstrap_replicate(task) -> np.ndarray:
    P, w_start, seed, index, max_iters, tol = task
    rng = make_rng(seed, index)
    pick = rng.integers(0, P.shape[0], P.shape[0])
    w, _, _, _ = _expectation_maximization(P[pick], w_start, max_iters, tol)
    return w


def bootstrap_ci(
    samples,
    n_max: int = 4,
    det: Optional[DetectionModel] = None,
    n_resamples: int = 1000,
    seed: int = 0,
    use_noise: bool = True,
    max_iters: int = EM_MAX_ITERS,
    tol: float = EM_TOL,
    workers: int = 1,
    start: Optional[np.ndarray] = None,
) -> BootstrapResult:
    """
    16th/84th percentile interval of each weight over resamples drawn with replacement.

    Resample i uses the stream (seed, i), so results do not depend on `workers`.
    EM in each resample starts from `start` (default uniform); the log-likelihood is
    concave in the weights, so the start only affects the iteration count.
    """
    x = samples_to_array(samples)
    if x.size == 0:
        raise EmptySampleError("no samples to resample")
    if n_resamples < 1:
        raise InvalidParameterError("need at least one resample")
    if n_resamples < 100:
        logger.warning("Only %d bootstrap resamples; intervals will be rough", n_resamples)
    P = component_densities(x, n_max, _sigma(det, use_noise))
    w_start = np.full(n_max + 1, 1.0 / (n_max + 1)) if start is None else np.asarray(start, dtype=float)
    if n_max == 0:
        replicates = np.ones((n_resamples, 1))
    else:
        tasks = [(P, w_start, seed, i, max_iters, tol) for i in range(n_resamples)]
        if workers > 1:
            with Pool(workers) as pool:
                replicates = np.array(pool.map(_bootstrap_replicate, tasks))
        else:
            replicates = np.array([_bootstrap_replicate(task) for task in tasks])
    lower, upper = np.percentile(replicates, BOOTSTRAP_PERCENTILES, axis=0)
    logger.info("Bootstrap: %d resamples, w0 interval [%.4f, %.4f]", n_resamples, lower[0], upper[0])
    return BootstrapResult(lower, upper, replicates)


def reconstruct(
    samples,
    n_max: int = 4,
    det: Optional[DetectionModel] = None,
    n_resamples: int = 1000,
    seed: int = 0,
    use_noise: bool = True,
    workers: int = 1,
) -> tuple[ReconstructionResult, BootstrapResult]:
    """mle_weights followed by bootstrap_ci started from the point estimate."""
    result = mle_weights(samples, n_max, det, use_noise=use_noise)
    boot = bootstrap_ci(samples, n_max, det, n_resamples, seed, use_noise,
                        workers=workers, start=result.weights.w)
    return result.with_intervals(boot.lower, boot.upper), boot


# -- Bayesian discrimination -----------------------------------------------------------

def _yes_parts(weights_yes: FockWeights, sigma: float):
    vacuum = HomodyneDistribution(FockWeights.fock(0), sigma)
    w = weights_yes.w
    if w.size > 1 and w[1:].sum() > 0:
        excited = HomodyneDistribution(FockWeights.normalized(np.concatenate([[0.0], w[1:]])), sigma)
    else:
        excited = None
    return vacuum, excited, float(w[0]), float(w[1:].sum())


def posterior_curve(
    x_grid,
    weights_yes: FockWeights,
    pdf_no,
    det: Optional[DetectionModel] = None,
    prior_p: float = 0.5,
    use_noise: bool = True,
) -> dict:
    """
    Posteriors (no object, interaction-free, interaction) for each x in x_grid.

    Returns arrays keyed x, p_no, p_ifm, p_int, p_ifm_vetoed. Points where every density
    vanishes raise OutOfSupportError.
    """
    if not 0.0 <= prior_p <= 1.0:
        raise InvalidParameterError("prior must lie in [0, 1]")
    x = samples_to_array(x_grid)
    vacuum, excited, w0, w_rest = _yes_parts(weights_yes, _sigma(det, use_noise))
    no = (1.0 - prior_p) * np.asarray(_pdf_of(pdf_no)(x), dtype=float)
    ifm = prior_p * w0 * vacuum.pdf(x)
    interaction = prior_p * w_rest * excited.pdf(x) if excited is not None else np.zeros_like(x)
    evidence = no + ifm + interaction
    if np.any(~(evidence > 0)):
        bad = x[~(evidence > 0)]
        raise OutOfSupportError(f"no density supports x = {bad[0]:.6g}")
    p_no, p_ifm, p_int = no / evidence, ifm / evidence, interaction / evidence
    with np.errstate(invalid="ignore", divide="ignore"):
        vetoed = np.where(p_ifm + p_no > 0, p_ifm / (p_ifm + p_no), 0.0)
    return {"x": x, "p_no": p_no, "p_ifm": p_ifm, "p_int": p_int, "p_ifm_vetoed": vetoed}


def bayes_posteriors(
    x,
    weights_yes: FockWeights,
    pdf_no,
    det: Optional[DetectionModel] = None,
    prior_p: float = 0.5,
    use_noise: bool = True,
) -> Posteriors:
    """Posteriors for a single rescaled result."""
    value = x.x if isinstance(x, RescaledSample) else float(x)
    curve = posterior_curve([value], weights_yes, pdf_no, det, prior_p, use_noise)
    p_no, p_ifm = float(curve["p_no"][0]), float(curve["p_ifm"][0])
    return Posteriors(p_no=p_no, p_ifm=p_ifm, p_int=max(0.0, 1.0 - p_no - p_ifm))


# -- threshold discrimination ----------------------------------------------------------

def threshold_scan(pdf_yes, pdf_no, L_grid: Sequence[float]) -> list[tuple[float, float, float]]:
    """(L, P(|x| <= L | object), P(|x| > L | no object)) for each L."""
    grid = [float(L) for L in L_grid]
    if any(L < 0 for L in grid):
        raise InvalidParameterError("thresholds must be nonnegative")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("thresholds must be ascending")
    yes, no = as_density(pdf_yes), as_density(pdf_no)
    return [(L, float(yes.central_mass(L)), 1.0 - float(no.central_mass(L))) for L in grid]


def optimal_threshold(pdf_yes, pdf_no, upper: Optional[float] = None) -> tuple[float, float]:
    """Bisect for P(|x| <= L | object) = P(|x| > L | no object); returns (L*, common confidence)."""
    yes, no = as_density(pdf_yes), as_density(pdf_no)
    if upper is None:
        upper = max(getattr(yes, "support_bound", MIN_QUADRATURE_BOUND),
                    getattr(no, "support_bound", MIN_QUADRATURE_BOUND))

    def gap(L: float) -> float:
        return float(yes.central_mass(L)) - (1.0 - float(no.central_mass(L)))

    low_gap, high_gap = gap(0.0), gap(upper)
    if not (low_gap < 0 < high_gap):
        raise NoCrossingError(f"discrimination curves do not cross on [0, {upper:g}]")
    L_star = bisect(gap, 0.0, upper, xtol=1e-10)
    confidence = 0.5 * (float(yes.central_mass(L_star)) + 1.0 - float(no.central_mass(L_star)))
    return float(L_star), confidence


def ev_figure_of_merit(p_detect: float, p_inconclusive: float, p_interaction: float) -> float:
    """eta = P(D) / (P(D) + P(int)), equal to P(D) / (1 - P(B)) for normalised inputs."""
    probabilities = (p_detect, p_inconclusive, p_interaction)
    if any(p < 0 for p in probabilities):
        raise InvalidParameterError("outcome probabilities must be nonnegative")
    if abs(sum(probabilities) - 1.0) > 1e-9:
        raise InvalidParameterError(f"outcome probabilities sum to {sum(probabilities):.12g}, expected 1")
    if p_detect + p_interaction == 0:
        raise InvalidParameterError("figure of merit undefined: no conclusive outcome")
    return p_detect / (p_detect + p_interaction)


def with_object_outcome_probs(weights_yes: FockWeights, vacuum, L: float) -> tuple[float, float, float]:
    """
    (p_detect, p_inconclusive, p_interaction) with an object present.

    Any transferred atom (n > 0) is an interaction; results are classified by the
    threshold only in the vacuum branch, whose density is `vacuum`.
    """
    if L < 0:
        raise InvalidParameterError("threshold must be nonnegative")
    w0 = float(weights_yes.w[0])
    p_interaction = float(weights_yes.w[1:].sum())
    inside = float(as_density(vacuum).central_mass(L))
    return w0 * inside, w0 * (1.0 - inside), p_interaction


def eta_vs_threshold(weights_yes: FockWeights, vacuum, pdf_no, L_grid: Sequence[float]) -> list[tuple[float, float, float]]:
    """(L, P(|x| > L | no object), eta(L)): figure of merit traded against confidence."""
    no = as_density(pdf_no)
    rows = []
    for L in L_grid:
        p_detect, p_inconclusive, p_interaction = with_object_outcome_probs(weights_yes, vacuum, L)
        if p_detect + p_interaction > 0:
            eta = p_detect / (p_detect + p_interaction)
        else:
            eta = float("nan")
        rows.append((float(L), 1.0 - float(no.central_mass(L)), eta))
    return rows


def discriminate(weights_yes: FockWeights, pdf_yes, pdf_no, vacuum) -> DiscriminationReport:
    """Optimal symmetric threshold and the figure of merit it yields."""
    L_star, _ = optimal_threshold(pdf_yes, pdf_no)
    confidence_with = float(as_density(pdf_yes).central_mass(L_star))
    confidence_without = 1.0 - float(as_density(pdf_no).central_mass(L_star))
    p_detect, p_inconclusive, p_interaction = with_object_outcome_probs(weights_yes, vacuum, L_star)
    eta = ev_figure_of_merit(p_detect, p_inconclusive, p_interaction)
    return DiscriminationReport(
        threshold_L=L_star,
        confidence_with=confidence_with,
        confidence_without=confidence_without,
        p_interaction=p_interaction,
        eta=eta,
        p_detect=p_detect,
        p_inconclusive=p_inconclusive,
    )


def counting_confidence(weights_yes: FockWeights, weights_no: FockWeights) -> tuple[float, float, float]:
    """Ideal atom counter deciding "object" iff no atom is found: (with, without, min of both)."""
    with_object = float(weights_yes.w[0])
    without_object = 1.0 - float(weights_no.w[0])
    return with_object, without_object, min(with_object, without_object)


def ideal_confidence(xi: float) -> float:
    """1 - 1/cosh^2(xi): counting confidence of perfect suppression against the pair state."""
    return 1.0 - 1.0 / math.cosh(xi) ** 2


def ideal_confidence_asymptote(xi: float) -> float:
    return 1.0 - 4.0 * math.exp(-2.0 * xi)


# -- loss-rate calibration -------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialFit:
    gamma: float  # 1/s
    amplitude: float
    residual: float  # rms relative residual


def _decay(t, amplitude, gamma):
    return amplitude * np.exp(-gamma * t)


def fit_exponential_decay(times: Sequence[float], counts: Sequence[float]) -> ExponentialFit:
    """
    Least-squares fit of N exp(-gamma t).

    A straight-line fit of log(counts) seeds a nonlinear fit with relative (multiplicative)
    errors, i.e. sigma proportional to the counts.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(counts, dtype=float)
    if t.size != y.size:
        raise InvalidParameterError("times and counts differ in length")
    if t.size < 3:
        raise InvalidParameterError("need at least three points")
    if np.any(y <= 0):
        raise InvalidParameterError("counts must be positive")
    if np.unique(t).size == 1:
        raise DegenerateFitError("all times are equal")
    if np.unique(t).size != t.size:
        raise DegenerateFitError("times must be distinct")

    if np.ptp(y) == 0:
        return ExponentialFit(gamma=0.0, amplitude=float(y[0]), residual=0.0)

    slope, intercept = np.polyfit(t, np.log(y), 1)
    p0 = (math.exp(intercept), -slope)
    try:
        (amplitude, gamma), _ = curve_fit(_decay, t, y, p0=p0, sigma=y, maxfev=10_000)
    except RuntimeError as e:
        logger.warning("Nonlinear decay fit failed (%s); keeping the log-linear estimate", e)
        amplitude, gamma = p0
    residual = float(np.sqrt(np.mean(((y - _decay(t, amplitude, gamma)) / y) ** 2)))
    return ExponentialFit(gamma=float(gamma), amplitude=float(amplitude), residual=residual)
