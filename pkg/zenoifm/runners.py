"""Scenario runners: each turns a ScenarioConfig into written CSV/JSON files."""
import logging
import math
from dataclasses import asdict, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from zenoifm.config import (
    ANALYSIS_JSON,
    BAYES_CSV,
    DECAY_CSV,
    DECAY_JSON,
    GROWTH_CSV,
    HISTOGRAM_CSV,
    HISTOGRAM_JSON,
    RECONSTRUCT_CSV,
    RECONSTRUCT_JSON,
    RESONANCE_CSV,
    THRESHOLD_CSV,
    VARIANCE_CSV,
    ZENO_CSV,
)
from zenoifm.dynamics import (
    evolve_density,
    evolve_moments,
    mean_pairs_closed_form,
    moments_from_density,
    resonance_scan,
    zeno_sweep,
)
from zenoifm.errors import InvalidParameterError
from zenoifm.fockspace import build_operators, thermal_weights, tmsv_weights, vacuum_state
from zenoifm.homodyne import HomodyneDistribution, ShotBatch, sample_shots, sample_variance
from zenoifm.inference import (
    discriminate,
    eta_vs_threshold,
    fit_exponential_decay,
    mle_weights,
    posterior_curve,
    reconstruct,
    threshold_scan,
)
from zenoifm.models import FockWeights, SpinDynamicsParams
from zenoifm.output import OutputWriter
from zenoifm.scenarios import Scenario, ScenarioConfig
from zenoifm.utils import make_rng

logger = logging.getLogger(__name__)

GROWTH_HEADER = ("t_s", "n_plus_closed", "n_plus_moments", "n_plus_master")
ZENO_HEADER = ("gamma_per_s", "n_plus")
RESONANCE_HEADER = ("delta_rad_s", "n_plus")
VARIANCE_HEADER = ("t_s", "xi", "var_theory_without", "var_sampled_without", "var_theory_with", "var_sampled_with")
HISTOGRAM_HEADER = ("shot", "n0_after", "n_plus_after", "x")
RECONSTRUCT_HEADER = ("n", "weight", "ci_lower", "ci_upper")
BAYES_HEADER = ("x", "p_no", "p_ifm", "p_int", "p_ifm_vetoed")
THRESHOLD_HEADER = ("threshold_L", "p_in_with", "p_out_without", "eta")
DECAY_HEADER = ("t_s", "count")

# Monte Carlo task numbers under the master seed
TASK_WITH = 0
TASK_WITHOUT = 1
TASK_DECAY = 2
TASK_VARIANCE = 100  # + 2k (without) and + 2k + 1 (with) for time point k

POSTERIOR_GRID = np.linspace(-20.0, 20.0, 401)
THRESHOLD_GRID = np.linspace(0.0, 8.0, 81)
DECAY_AMPLITUDE = 1000.0


def _writer(config: ScenarioConfig) -> OutputWriter:
    return OutputWriter(config.output_dir, config.hash, config.seed)


def _at_time(physics: SpinDynamicsParams, t: float) -> SpinDynamicsParams:
    """Same rates, evolved up to t."""
    return replace(physics, t_final=t, dt=min(physics.dt, t) if t > 0 else physics.dt)


def _time_grid(config: ScenarioConfig) -> np.ndarray:
    return np.linspace(0.0, config.physics.t_final, config.extras.t_grid_points)


def _sigma(config: ScenarioConfig) -> float:
    return config.detection.sigma_rescaled if config.extras.use_noise else 0.0


def with_object_weights(physics: SpinDynamicsParams) -> FockWeights:
    """Thermal-form weights with the mean pair number of the lossy dynamics."""
    n_mean = evolve_moments(physics).final.n_plus
    logger.info("With object: <N_+1>=%.6g at gamma=%.4g", n_mean, physics.gamma)
    return thermal_weights(max(0.0, n_mean))


def without_object_weights(physics: SpinDynamicsParams) -> FockWeights:
    return tmsv_weights(physics.xi)


def _histogram_batch(config: ScenarioConfig, object_present: bool) -> tuple[FockWeights, ShotBatch]:
    if object_present:
        weights, task = with_object_weights(config.physics), TASK_WITH
    else:
        weights, task = without_object_weights(config.physics), TASK_WITHOUT
    return weights, sample_shots(weights, config.detection, config.shots, config.seed, task)


def _add_histogram(writer: OutputWriter, label: str, batch: ShotBatch) -> None:
    rows = (
        (i, int(n0), int(n_plus), x)
        for i, (n0, n_plus, x) in enumerate(zip(batch.n0_after, batch.n_plus_after, batch.x))
    )
    writer.add_csv(HISTOGRAM_CSV.format(label=label), HISTOGRAM_HEADER, rows)


def _label(object_present: bool) -> str:
    return "with" if object_present else "without"


# -- dynamics --------------------------------------------------------------------------

def _master_column(config: ScenarioConfig, times: np.ndarray) -> List[float]:
    """<N_+1> from the master equation at each grid time; nan once the cutoff is reached."""
    cutoff = config.cutoff
    ops = build_operators(cutoff)
    rho = vacuum_state(cutoff)
    column = [moments_from_density(rho, ops).n_plus]
    for t_prev, t_next in zip(times, times[1:]):
        span = float(t_next - t_prev)
        if span <= 0:
            column.append(column[-1])
            continue
        segment = SpinDynamicsParams(config.physics.omega, config.physics.gamma, config.physics.delta,
                                     span, min(config.physics.dt, span))
        trajectory = evolve_density(rho, segment, on_overflow="stop")
        if not trajectory.completed:
            logger.warning("Master equation left the cutoff at t=%.4g s; remaining rows are nan", t_prev)
            break
        rho = trajectory.final
        column.append(moments_from_density(rho, ops).n_plus)
    column.extend([math.nan] * (times.size - len(column)))
    return column


def run_growth(config: ScenarioConfig) -> List[Path]:
    """<N_+1>(t) from the closed form, the moment equations and the master equation."""
    times = _time_grid(config)
    closed = mean_pairs_closed_form(config.physics.omega, times)
    moments = [evolve_moments(_at_time(config.physics, float(t))).final.n_plus for t in times]
    master = _master_column(config, times)
    writer = _writer(config)
    writer.add_csv(GROWTH_CSV, GROWTH_HEADER, zip(times, np.atleast_1d(closed), moments, master))
    return writer.commit()


def run_zeno_sweep(config: ScenarioConfig, gamma_grid: Optional[tuple] = None) -> List[Path]:
    """Final <N_+1> across loss rates, plus the detuning scan when a detuning grid is set."""
    grid = gamma_grid if gamma_grid else config.extras.gamma_grid
    if not grid:
        grid = (config.physics.gamma,)
    writer = _writer(config)
    sweep = zeno_sweep(config.physics, grid, config.extras.workers)
    writer.add_csv(ZENO_CSV, ZENO_HEADER, sweep)
    if config.extras.delta_grid:
        scan = resonance_scan(config.physics, config.extras.delta_grid, config.extras.workers)
        writer.add_csv(RESONANCE_CSV, RESONANCE_HEADER, scan)
    return writer.commit()


# -- homodyne statistics ---------------------------------------------------------------

def run_variance(config: ScenarioConfig) -> List[Path]:
    """Quadrature variance with and without object along the time grid."""
    sigma2 = config.detection.sigma_rescaled ** 2
    rows = []
    for k, t in enumerate(_time_grid(config)):
        physics = _at_time(config.physics, float(t))
        without = without_object_weights(physics)
        with_object = with_object_weights(physics)
        sampled_without = sample_variance(
            sample_shots(without, config.detection, config.shots, config.seed, TASK_VARIANCE + 2 * k).x
        )
        sampled_with = sample_variance(
            sample_shots(with_object, config.detection, config.shots, config.seed, TASK_VARIANCE + 2 * k + 1).x
        )
        rows.append((
            float(t),
            physics.xi,
            math.cosh(2.0 * physics.xi) + sigma2,
            sampled_without,
            2.0 * with_object.mean + 1.0 + sigma2,
            sampled_with,
        ))
        logger.debug("variance row t=%.4g done", t)
    writer = _writer(config)
    writer.add_csv(VARIANCE_CSV, VARIANCE_HEADER, rows)
    return writer.commit()


def run_histogram(config: ScenarioConfig, object_present: bool = False) -> List[Path]:
    """Synthesised raw and rescaled shots with a variance summary."""
    weights, batch = _histogram_batch(config, object_present)
    label = _label(object_present)
    writer = _writer(config)
    _add_histogram(writer, label, batch)
    writer.add_json(HISTOGRAM_JSON.format(label=label), {
        "object_present": object_present,
        "shots": len(batch),
        "variance": sample_variance(batch.x),
        "variance_theory": HomodyneDistribution(weights, config.detection.sigma_rescaled).variance,
    })
    return writer.commit()


# -- inference -------------------------------------------------------------------------

def _reconstruction_payload(result) -> Dict:
    return {
        "weights": result.weights.w,
        "ci": [[lo, hi] for lo, hi in zip(result.ci_lower, result.ci_upper)],
        "log_likelihood": result.log_likelihood,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def _reconstruct_with(config: ScenarioConfig, batch: ShotBatch):
    extras = config.extras
    result, _ = reconstruct(
        batch.x,
        n_max=extras.fit_n_max,
        det=config.detection,
        n_resamples=extras.bootstrap_resamples,
        seed=config.seed,
        use_noise=extras.use_noise,
        workers=extras.workers,
    )
    return result


def run_reconstruct(config: ScenarioConfig) -> List[Path]:
    """Fock weights of the "with object" shots with bootstrap intervals."""
    _, batch = _histogram_batch(config, object_present=True)
    result = _reconstruct_with(config, batch)
    writer = _writer(config)
    rows = zip(range(result.weights.w.size), result.weights.w, result.ci_lower, result.ci_upper)
    writer.add_csv(RECONSTRUCT_CSV, RECONSTRUCT_HEADER, rows)
    writer.add_json(RECONSTRUCT_JSON, _reconstruction_payload(result))
    return writer.commit()


def _posterior_rows(curve: Dict[str, np.ndarray]):
    return zip(*(curve[key] for key in BAYES_HEADER))


def run_bayes(config: ScenarioConfig) -> List[Path]:
    """Posterior curve from the maximum-likelihood "with object" weights."""
    _, batch = _histogram_batch(config, object_present=True)
    extras = config.extras
    weights_yes = mle_weights(batch.x, extras.fit_n_max, config.detection, use_noise=extras.use_noise).weights
    pdf_no = HomodyneDistribution(without_object_weights(config.physics), _sigma(config))
    curve = posterior_curve(POSTERIOR_GRID, weights_yes, pdf_no, config.detection, extras.prior, extras.use_noise)
    writer = _writer(config)
    writer.add_csv(BAYES_CSV, BAYES_HEADER, _posterior_rows(curve))
    return writer.commit()


def run_full_analysis(config: ScenarioConfig) -> List[Path]:
    """
    Both histograms, reconstruction, threshold discrimination, the figure of merit and
    the posterior curve, written together.
    """
    extras = config.extras
    sigma = _sigma(config)
    _, batch_with = _histogram_batch(config, object_present=True)
    weights_no, batch_without = _histogram_batch(config, object_present=False)

    result = _reconstruct_with(config, batch_with)
    weights_yes = result.weights
    pdf_no = HomodyneDistribution(weights_no, sigma)
    # "With object" confidence is measured on the interaction-free (vacuum) branch;
    # shots with transferred atoms are interactions, not threshold decisions.
    vacuum = HomodyneDistribution(FockWeights.fock(0), sigma)

    report = discriminate(weights_yes, vacuum, pdf_no, vacuum)
    logger.info("Threshold L*=%.4f confidence=%.4f eta=%.4f", report.threshold_L, report.confidence, report.eta)
    scan = threshold_scan(vacuum, pdf_no, THRESHOLD_GRID)
    merit = eta_vs_threshold(weights_yes, vacuum, pdf_no, THRESHOLD_GRID)
    curve = posterior_curve(POSTERIOR_GRID, weights_yes, pdf_no, config.detection, extras.prior, extras.use_noise)

    writer = _writer(config)
    _add_histogram(writer, _label(True), batch_with)
    _add_histogram(writer, _label(False), batch_without)
    writer.add_csv(THRESHOLD_CSV, THRESHOLD_HEADER,
                   ((L, p_in, p_out, eta) for (L, p_in, p_out), (_, _, eta) in zip(scan, merit)))
    writer.add_csv(BAYES_CSV, BAYES_HEADER, _posterior_rows(curve))
    writer.add_json(ANALYSIS_JSON, {
        "weights": weights_yes.w,
        "ci": [[lo, hi] for lo, hi in zip(result.ci_lower, result.ci_upper)],
        "threshold_L": report.threshold_L,
        "confidence": report.confidence,
        "eta": report.eta,
        "posterior_curve": [dict(zip(BAYES_HEADER, row)) for row in _posterior_rows(curve)],
        "discrimination": asdict(report),
        "variance_with": sample_variance(batch_with.x),
        "variance_without": sample_variance(batch_without.x),
    })
    return writer.commit()


# -- loss calibration ------------------------------------------------------------------

def synthetic_decay(gamma: float, times: np.ndarray, noise: float, seed: int) -> np.ndarray:
    """Exponential decay with multiplicative Gaussian noise of relative size `noise`."""
    if gamma < 0:
        raise InvalidParameterError("synthetic loss rate must be nonnegative")
    counts = DECAY_AMPLITUDE * np.exp(-gamma * times)
    if noise > 0:
        counts = counts * (1.0 + noise * make_rng(seed, TASK_DECAY).standard_normal(times.size))
    return np.clip(counts, np.finfo(float).tiny, None)


def run_calibrate_loss(config: ScenarioConfig, synthetic_gamma: Optional[float] = None) -> List[Path]:
    """Fit a synthetic loss curve and report how well the rate is recovered."""
    extras = config.extras
    gamma_true = extras.synthetic_gamma if synthetic_gamma is None else float(synthetic_gamma)
    times = np.linspace(0.0, extras.decay_t_max, extras.decay_points)
    counts = synthetic_decay(gamma_true, times, extras.decay_noise, config.seed)
    fit = fit_exponential_decay(times, counts)
    error = abs(fit.gamma - gamma_true)
    relative_error = error / gamma_true if gamma_true > 0 else error
    logger.info("Loss fit: gamma=%.6g (true %.6g), relative error %.3e", fit.gamma, gamma_true, relative_error)
    writer = _writer(config)
    writer.add_csv(DECAY_CSV, DECAY_HEADER, zip(times, counts))
    writer.add_json(DECAY_JSON, {
        "gamma_true": gamma_true,
        "gamma_fit": fit.gamma,
        "amplitude": fit.amplitude,
        "residual": fit.residual,
        "relative_error": relative_error,
    })
    return writer.commit()


RUNNERS: Dict[Scenario, Callable[..., List[Path]]] = {
    Scenario.GROWTH: run_growth,
    Scenario.ZENO_SWEEP: run_zeno_sweep,
    Scenario.VARIANCE_VS_TIME: run_variance,
    Scenario.HISTOGRAM: run_histogram,
    Scenario.RECONSTRUCT: run_reconstruct,
    Scenario.BAYES: run_bayes,
    Scenario.EV_MERIT: run_full_analysis,
    Scenario.CALIBRATE_LOSS: run_calibrate_loss,
}
