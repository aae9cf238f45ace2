"""
Homodyne counting statistics of displaced Fock states.

The rescaled variable x is normalised so that the displaced vacuum is a standard
normal (V_sn = 1); a displaced Fock state |n> then has density

    P(x|n) = psi_n(x / sqrt 2)**2 / sqrt 2,    Var = 2n + 1,

with psi_n the normalised Hermite functions. Gaussian detection noise of variance
sigma**2 (rescaled units) is handled exactly: it equals binomial loss with
efficiency 1 / (1 + sigma**2) followed by a stretch of x by sqrt(1 + sigma**2).
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import erf

from zenoifm.errors import InvalidParameterError
from zenoifm.fockspace import attenuate_weights
from zenoifm.models import DetectionModel, FockWeights, RawShot, RescaledSample
from zenoifm.utils import make_streams

logger = logging.getLogger(__name__)

PI_QUARTER = math.pi ** -0.25
RESCALE_AT = 1e100
CRAMER_BOUND = 1.0865
PDF_ENVELOPE = CRAMER_BOUND ** 2 / math.sqrt(2.0 * math.pi)  # sup_x P(x|n) for every n
SAMPLING_MARGIN = 8.0
MIN_QUADRATURE_BOUND = 40.0


def _hermite_sums(y: np.ndarray, weights: np.ndarray, with_mass: bool = False):
    """
    sum_n w_n psi_n(y)**2 and, optionally, sum_n w_n * integral_{-|y|}^{|y|} psi_n**2.

    The recurrence runs on psi_n * exp(-log_scale); whenever a value exceeds RESCALE_AT
    the running terms are divided down and the factor moved into log_scale.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if with_mass:
        y = np.abs(y)
    log_scale = -0.5 * y * y
    previous = np.zeros_like(y)
    current = np.full_like(y, PI_QUARTER)
    density = weights[0] * current * current
    mass = None
    if with_mass:
        half = 0.5 * erf(y)  # integral_0^y psi_0**2
        mass = weights[0] * 2.0 * half

    with np.errstate(divide="ignore", under="ignore", over="ignore"):
        for n in range(1, weights.size):
            previous, current = current, math.sqrt(2.0 / n) * y * current - math.sqrt((n - 1) / n) * previous
            if with_mass:
                product = current * previous
                actual = np.sign(product) * np.exp(np.log(np.abs(product)) + 2.0 * log_scale)
                half = half - actual / math.sqrt(2.0 * n)
                if weights[n]:
                    mass = mass + weights[n] * 2.0 * half
            if weights[n]:
                density = density + weights[n] * current * current
            big = np.abs(current) > RESCALE_AT
            if big.any():
                factor = np.abs(current[big])
                current[big] /= factor
                previous[big] /= factor
                density[big] /= factor * factor
                log_scale[big] += np.log(factor)
        density = np.exp(np.log(density) + 2.0 * log_scale)
    return density, mass


def _squeeze(value, like):
    return float(value[0]) if np.ndim(like) == 0 else value


class HomodyneDistribution:
    """Displaced Fock mixture, optionally convolved with Gaussian detection noise."""

    def __init__(self, weights: FockWeights, sigma_resc: float = 0.0):
        if sigma_resc < 0:
            raise InvalidParameterError("noise scale must be nonnegative")
        self.weights = weights
        self.sigma_resc = float(sigma_resc)
        self._stretch = math.sqrt(1.0 + self.sigma_resc ** 2)
        efficiency = 1.0 / self._stretch ** 2
        effective = attenuate_weights(weights, efficiency) if self.sigma_resc > 0 else weights
        # Trailing zero weights cost recurrence steps but contribute nothing.
        last = int(np.flatnonzero(effective.w)[-1])
        self._effective = effective.w[: last + 1]

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        y = x_arr / (math.sqrt(2.0) * self._stretch)
        density, _ = _hermite_sums(y, self._effective)
        return _squeeze(density / (math.sqrt(2.0) * self._stretch), x_arr)

    def __call__(self, x):
        return self.pdf(x)

    def central_mass(self, L):
        """P(|x| <= L)."""
        L_arr = np.asarray(L, dtype=float)
        if np.any(L_arr < 0):
            raise InvalidParameterError("threshold must be nonnegative")
        _, mass = _hermite_sums(L_arr / (math.sqrt(2.0) * self._stretch), self._effective, with_mass=True)
        return _squeeze(np.clip(mass, 0.0, 1.0), L_arr)

    @property
    def variance(self) -> float:
        return displaced_variance(self.weights) + self.sigma_resc ** 2

    @property
    def support_bound(self) -> float:
        return max(MIN_QUADRATURE_BOUND, 12.0 * math.sqrt(self.variance))


def displaced_fock_pdf(n: int, x):
    """Density of the rescaled result for a displaced Fock state |n> (no detection noise)."""
    if n < 0 or int(n) != n:
        raise InvalidParameterError(f"Fock level must be a nonnegative integer, got {n}")
    return HomodyneDistribution(FockWeights.fock(int(n))).pdf(x)


def mixture_pdf(weights: FockWeights, x, det: Optional[DetectionModel] = None):
    """Weighted displaced Fock densities convolved with the detection noise of `det`."""
    sigma = det.sigma_rescaled if det is not None else 0.0
    return HomodyneDistribution(weights, sigma).pdf(x)


def displaced_variance(weights: FockWeights) -> float:
    """2 <n> + 1 in units of the shot noise."""
    return 2.0 * weights.mean + 1.0


def rescale_shot(shot: RawShot, det: DetectionModel) -> RescaledSample:
    """x = (N_+1' - c (N_0' + N_+1')) / sqrt(c (1 - c) (N_0' + N_+1')), c = transfer fraction."""
    total = shot.total
    if total <= 0:
        raise InvalidParameterError("cannot rescale a shot without atoms")
    c = det.transfer_fraction
    return RescaledSample((shot.n_plus_after - c * total) / math.sqrt(c * (1.0 - c) * total))


def rescale_counts(n0_after: np.ndarray, n_plus_after: np.ndarray, det: DetectionModel) -> np.ndarray:
    """Vectorised rescale_shot."""
    total = np.asarray(n0_after, dtype=float) + np.asarray(n_plus_after, dtype=float)
    if np.any(total <= 0):
        raise InvalidParameterError("cannot rescale a shot without atoms")
    c = det.transfer_fraction
    return (n_plus_after - c * total) / np.sqrt(c * (1.0 - c) * total)


def _draw_displaced_fock(levels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw x ~ P(x|n) for each entry of `levels` by rejection against a uniform envelope."""
    out = np.empty(levels.size)
    for n in np.unique(levels):
        index = np.flatnonzero(levels == n)
        if n == 0:
            out[index] = rng.standard_normal(index.size)
            continue
        bound = math.sqrt(2.0) * (math.sqrt(2.0 * n + 1.0) + SAMPLING_MARGIN)
        acceptance = 1.0 / (2.0 * bound * PDF_ENVELOPE)
        accepted = []
        needed = index.size
        while needed > 0:
            batch = int(1.3 * needed / acceptance) + 16
            candidates = rng.uniform(-bound, bound, batch)
            heights = rng.uniform(0.0, PDF_ENVELOPE, batch)
            keep = candidates[heights < displaced_fock_pdf(int(n), candidates)]
            accepted.append(keep[:needed])
            needed -= min(needed, keep.size)
        out[index] = np.concatenate(accepted)
    return out


@dataclass(frozen=True, eq=False)
class ShotBatch:
    """Synthesised homodyne shots in array form."""
    n0_after: np.ndarray
    n_plus_after: np.ndarray
    x: np.ndarray  # rescaled results
    x_drawn: np.ndarray  # drawn results before integer rounding
    levels: np.ndarray  # Fock level behind each shot
    clipped: np.ndarray  # shots whose transferred count left [0, N]

    def __len__(self) -> int:
        return self.x.size

    def raw_shots(self) -> list[RawShot]:
        return [RawShot(float(a), float(b)) for a, b in zip(self.n0_after, self.n_plus_after)]

    def rescaled(self) -> list[RescaledSample]:
        return [RescaledSample(float(value)) for value in self.x]


def sample_shots(
    weights: FockWeights, det: DetectionModel, n_shots: int, seed: int, task: int = 0
) -> ShotBatch:
    """
    Synthesise homodyne shots.

    Per shot: condensate number from a Gaussian, Fock level from `weights`, the ideal
    rescaled result from P(x|n), Gaussian atom-counting noise, and raw counts from the
    inverted rescaling rounded to whole atoms. Deterministic for fixed (seed, task).
    """
    if n_shots <= 0:
        raise InvalidParameterError("number of shots must be positive")
    streams = make_streams(seed, task)
    c = det.transfer_fraction

    n_total = np.rint(streams.condensate.normal(det.n_condensate_mean, det.n_condensate_sd, n_shots))
    n_total = np.clip(n_total, 1.0, None)
    shot_noise = np.sqrt(c * (1.0 - c) * n_total)

    levels = streams.fock.choice(weights.w.size, size=n_shots, p=weights.w)
    x_ideal = _draw_displaced_fock(levels, streams.quadrature)
    x_drawn = x_ideal + det.sigma_det_atoms * streams.noise.standard_normal(n_shots) / shot_noise

    target = np.rint(c * n_total + x_drawn * shot_noise)
    # Atom numbers are physical: a transferred count outside [0, N] is clamped.
    clipped = (target < 0.0) | (target > n_total)
    if clipped.any():
        logger.warning("%d of %d shots clamped to [0, N] atoms (seed=%d, task=%d)",
                       int(clipped.sum()), n_shots, seed, task)
    n_plus = np.clip(target, 0.0, n_total)
    n0 = n_total - n_plus
    x = rescale_counts(n0, n_plus, det)
    logger.debug("sampled %d shots (seed=%d, task=%d), variance %.4f", n_shots, seed, task, sample_variance(x))
    return ShotBatch(n0, n_plus, x, x_drawn, levels, clipped)


def samples_to_array(samples: Union[Sequence[RescaledSample], np.ndarray, Iterable[float]]) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples.astype(float).ravel()
    return np.array([s.x if isinstance(s, RescaledSample) else float(s) for s in samples], dtype=float)


def sample_variance(samples) -> float:
    x = samples_to_array(samples)
    if x.size < 2:
        raise InvalidParameterError("need at least two samples for a variance")
    return float(np.var(x, ddof=1))
