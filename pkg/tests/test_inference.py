import logging
import math

import numpy as np
import pytest
from scipy.stats import norm

from zenoifm.errors import (
    DegenerateFitError,
    EmptySampleError,
    InvalidParameterError,
    NoCrossingError,
    OutOfSupportError,
)
from zenoifm.fockspace import thermal_weights, tmsv_weights
from zenoifm.homodyne import HomodyneDistribution, sample_shots
from zenoifm.inference import (
    QuadratureDensity,
    adaptive_simpson,
    bayes_posteriors,
    bootstrap_ci,
    counting_confidence,
    discriminate,
    eta_vs_threshold,
    ev_figure_of_merit,
    fit_exponential_decay,
    ideal_confidence,
    ideal_confidence_asymptote,
    mle_weights,
    optimal_threshold,
    posterior_curve,
    reconstruct,
    threshold_scan,
    with_object_outcome_probs,
)
from zenoifm.models import DetectionModel, FockWeights, Posteriors
from zenoifm.runners import synthetic_decay

NOISELESS = DetectionModel(sigma_det_atoms=0.0)
VACUUM = HomodyneDistribution(FockWeights.fock(0))


@pytest.fixture(scope="module")
def mixture_samples():
    truth = FockWeights.normalized([0.6, 0.3, 0.1])
    return truth, sample_shots(truth, NOISELESS, 20000, seed=42).x


# -- figure of merit -------------------------------------------------------------------

def test_figure_of_merit_from_outcome_split():
    assert ev_figure_of_merit(0.60, 0.07, 0.33) == pytest.approx(0.6452, abs=1e-4)


def test_figure_of_merit_validation():
    with pytest.raises(InvalidParameterError):
        ev_figure_of_merit(0.5, 0.2, 0.2)
    with pytest.raises(InvalidParameterError):
        ev_figure_of_merit(-0.1, 0.6, 0.5)
    with pytest.raises(InvalidParameterError):
        ev_figure_of_merit(0.0, 1.0, 0.0)


def test_perfect_suppression_gives_unit_merit():
    p_detect, p_inconclusive, p_interaction = with_object_outcome_probs(FockWeights.fock(0), VACUUM, 50.0)
    assert p_interaction == 0.0
    assert p_detect == pytest.approx(1.0)
    assert ev_figure_of_merit(p_detect, p_inconclusive, p_interaction) == pytest.approx(1.0)


def test_outcome_probabilities_split_the_vacuum_branch():
    weights = FockWeights.normalized([0.67, 0.33])
    p_detect, p_inconclusive, p_interaction = with_object_outcome_probs(weights, VACUUM, 1.0)
    assert p_detect == pytest.approx(0.67 * math.erf(1 / math.sqrt(2)))
    assert p_detect + p_inconclusive + p_interaction == pytest.approx(1.0)
    assert p_interaction == pytest.approx(0.33)


def test_merit_falls_as_threshold_tightens():
    weights = thermal_weights(0.49)
    pdf_no = HomodyneDistribution(tmsv_weights(3.1))
    rows = eta_vs_threshold(weights, VACUUM, pdf_no, [0.5, 1.0, 2.0, 4.0])
    etas = [eta for _, _, eta in rows]
    confidences = [c for _, c, _ in rows]
    assert etas == sorted(etas)
    assert confidences == sorted(confidences, reverse=True)


# -- threshold discrimination ----------------------------------------------------------

def test_vacuum_against_pair_state_threshold():
    pdf_no = HomodyneDistribution(tmsv_weights(3.1))
    L_star, confidence = optimal_threshold(VACUUM, pdf_no)
    assert L_star == pytest.approx(1.71, abs=0.02)
    assert confidence == pytest.approx(0.913, abs=0.003)
    assert VACUUM.central_mass(L_star) == pytest.approx(1.0 - pdf_no.central_mass(L_star), abs=1e-8)


def test_strong_suppression_pipeline_threshold():
    sigma = DetectionModel().sigma_rescaled
    vacuum = HomodyneDistribution(FockWeights.fock(0), sigma)
    pdf_no = HomodyneDistribution(tmsv_weights(3.1), sigma)
    L_star, confidence = optimal_threshold(vacuum, pdf_no)
    assert 1.4 <= L_star <= 2.0
    assert confidence == pytest.approx(0.90, abs=0.03)

    report = discriminate(thermal_weights(0.49), vacuum, pdf_no, vacuum)
    assert report.threshold_L == pytest.approx(L_star)
    assert report.confidence_with == pytest.approx(report.confidence_without, abs=1e-8)
    assert report.eta == pytest.approx(0.65, abs=0.02)
    assert report.p_detect == pytest.approx(0.60, abs=0.02)
    assert report.p_inconclusive == pytest.approx(0.07, abs=0.02)
    assert report.p_interaction == pytest.approx(0.33, abs=0.02)


def test_whole_mixture_overstates_threshold():
    sigma = DetectionModel().sigma_rescaled
    pdf_no = HomodyneDistribution(tmsv_weights(3.1), sigma)
    vacuum_L, _ = optimal_threshold(HomodyneDistribution(FockWeights.fock(0), sigma), pdf_no)
    mixture_L, _ = optimal_threshold(HomodyneDistribution(thermal_weights(0.49), sigma), pdf_no)
    assert mixture_L > vacuum_L + 0.3


def test_quadrature_density_agrees_with_closed_form():
    exact = optimal_threshold(VACUUM, HomodyneDistribution(thermal_weights(4.0)))
    numeric = optimal_threshold(norm.pdf, lambda x: norm.pdf(x, scale=3.0))
    assert numeric[0] == pytest.approx(exact[0], abs=1e-5)
    assert numeric[1] == pytest.approx(exact[1], abs=1e-6)


def test_adaptive_simpson():
    assert adaptive_simpson(norm.pdf, -5.0, 5.0) == pytest.approx(math.erf(5 / math.sqrt(2)), abs=1e-10)
    density = QuadratureDensity(norm.pdf)
    assert density.central_mass(0.0) == 0.0
    assert density.central_mass(1.0) == pytest.approx(math.erf(1 / math.sqrt(2)), abs=1e-9)
    with pytest.raises(InvalidParameterError):
        density.central_mass(-1.0)


def test_no_crossing_on_short_interval():
    with pytest.raises(NoCrossingError):
        optimal_threshold(VACUUM, HomodyneDistribution(tmsv_weights(3.1)), upper=1e-3)


def test_threshold_scan_rows_and_validation():
    pdf_no = HomodyneDistribution(tmsv_weights(1.0))
    rows = threshold_scan(VACUUM, pdf_no, [0.0, 1.0, 2.0])
    assert rows[0] == (0.0, 0.0, 1.0)
    assert rows[1][1] == pytest.approx(math.erf(1 / math.sqrt(2)))
    with pytest.raises(InvalidParameterError):
        threshold_scan(VACUUM, pdf_no, [2.0, 1.0])
    with pytest.raises(InvalidParameterError):
        threshold_scan(VACUUM, pdf_no, [-1.0])


def test_discriminate_noiseless_vacuum():
    pdf_no = HomodyneDistribution(tmsv_weights(3.1))
    report = discriminate(FockWeights.fock(0), VACUUM, pdf_no, VACUUM)
    assert report.eta == pytest.approx(1.0)
    assert report.p_interaction == 0.0
    assert report.confidence == pytest.approx(0.913, abs=0.003)
    assert report.p_detect == pytest.approx(report.confidence_with)


# -- counting confidence ---------------------------------------------------------------

@pytest.mark.parametrize("xi", [0.5, 1.0, 2.5, 3.1])
def test_ideal_counting_confidence(xi):
    _, _, common = counting_confidence(FockWeights.fock(0), tmsv_weights(xi))
    assert common == pytest.approx(ideal_confidence(xi), rel=1e-7)


@pytest.mark.parametrize("xi", [2.5, 3.0, 4.0])
def test_ideal_confidence_asymptote(xi):
    assert ideal_confidence(xi) == pytest.approx(ideal_confidence_asymptote(xi), rel=1e-3)


# -- Bayesian posteriors ---------------------------------------------------------------

def test_posterior_curve_at_experiment_scale():
    det = DetectionModel()
    weights_yes = thermal_weights(0.49)
    pdf_no = HomodyneDistribution(tmsv_weights(3.1), det.sigma_rescaled)
    x = np.array([-20.0, -8.0, -6.5, 0.0, 6.5, 8.0, 20.0])
    curve = posterior_curve(x, weights_yes, pdf_no, det, prior_p=0.5)
    total = curve["p_no"] + curve["p_ifm"] + curve["p_int"]
    assert np.allclose(total, 1.0)
    at_zero = curve["p_ifm"][3]
    assert 0.80 <= at_zero <= 0.88
    assert np.all(curve["p_no"][[0, 1, 2, 4, 5, 6]] > 0.99)
    assert np.all(curve["p_ifm_vetoed"] >= curve["p_ifm"])


def test_single_point_posteriors():
    pdf_no = HomodyneDistribution(tmsv_weights(3.1))
    result = bayes_posteriors(0.0, thermal_weights(0.49), pdf_no, prior_p=0.5)
    assert isinstance(result, Posteriors)
    assert result.p_ifm_vetoed > result.p_ifm
    certain = bayes_posteriors(0.0, thermal_weights(0.49), pdf_no, prior_p=1.0)
    assert certain.p_no == 0.0


def test_posterior_out_of_support():
    with pytest.raises(OutOfSupportError):
        posterior_curve([100.0], FockWeights.fock(0), lambda x: np.zeros_like(x))
    with pytest.raises(InvalidParameterError):
        posterior_curve([0.0], FockWeights.fock(0), VACUUM, prior_p=1.5)


# -- maximum likelihood ----------------------------------------------------------------

def test_em_recovers_mixture_and_never_decreases(mixture_samples):
    truth, x = mixture_samples
    result = mle_weights(x, n_max=2, det=NOISELESS)
    assert result.converged
    assert np.allclose(result.weights.w, truth.w, atol=0.08)
    trace = result.log_likelihood_trace
    assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1]))
    assert result.log_likelihood == trace[-1]


def test_em_vacuum_only_fit():
    x = sample_shots(FockWeights.fock(0), NOISELESS, 500, seed=1).x
    result = mle_weights(x, n_max=0)
    assert result.weights.w.tolist() == [1.0]


def test_mle_rejects_empty_samples():
    with pytest.raises(EmptySampleError):
        mle_weights([], n_max=2)
    with pytest.raises(EmptySampleError):
        bootstrap_ci(np.array([]), n_max=2)


def test_noise_aware_fit_of_noisy_data():
    det = DetectionModel(sigma_det_atoms=40.0)
    truth = FockWeights.normalized([0.7, 0.3])
    x = sample_shots(truth, det, 20000, seed=8).x
    assert mle_weights(x, n_max=1, det=det).weights.w[0] == pytest.approx(0.7, abs=0.06)


def test_bootstrap_is_deterministic_and_worker_independent(caplog):
    x = sample_shots(FockWeights.normalized([0.7, 0.3]), NOISELESS, 400, seed=4).x
    with caplog.at_level(logging.WARNING):
        serial = bootstrap_ci(x, n_max=1, n_resamples=20, seed=9)
    assert "bootstrap resamples" in caplog.text
    again = bootstrap_ci(x, n_max=1, n_resamples=20, seed=9)
    parallel = bootstrap_ci(x, n_max=1, n_resamples=20, seed=9, workers=2)
    assert np.array_equal(serial.replicates, again.replicates)
    assert np.array_equal(serial.replicates, parallel.replicates)
    assert serial.replicates.shape == (20, 2)
    assert np.all(serial.lower <= serial.upper)


@pytest.mark.slow
def test_thermal_family_recovery_and_interval_coverage():
    trials, n_max = 60, 2
    covered = np.zeros(n_max + 1)
    errors = []
    for trial in range(trials):
        n_mean = (0.3, 0.49)[trial % 2]
        truth = FockWeights.normalized(thermal_weights(n_mean).w[: n_max + 1])
        x = sample_shots(truth, NOISELESS, 1000, seed=trial).x

        result = mle_weights(x, n_max=n_max)
        trace = result.log_likelihood_trace
        assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1]))

        boot = bootstrap_ci(x, n_max=n_max, n_resamples=200, seed=trial, start=result.weights.w)
        covered += (boot.lower <= truth.w) & (truth.w <= boot.upper)
        errors.append(result.weights.w - truth.w)

    # 16/84 percentiles bracket the truth about 68% of the time; 3 sigma binomial margin
    rate = covered / trials
    margin = 3.0 * math.sqrt(0.68 * 0.32 / trials)
    assert np.all(np.abs(rate - 0.68) <= margin)
    assert np.all(np.abs(np.mean(errors, axis=0)) < 0.01)


def test_reconstruct_intervals_contain_estimate():
    x = sample_shots(thermal_weights(0.49), NOISELESS, 2000, seed=6).x
    result, boot = reconstruct(x, n_max=3, n_resamples=100, seed=6)
    w = result.weights.w
    assert np.all(result.ci_lower <= w) and np.all(w <= result.ci_upper)
    assert result.ci_upper[0] - result.ci_lower[0] < 0.2
    assert boot.replicates.shape == (100, 4)


# -- loss calibration ------------------------------------------------------------------

def test_noiseless_decay_recovered_exactly():
    times = np.linspace(0.0, 0.05, 20)
    fit = fit_exponential_decay(times, 1000.0 * np.exp(-58.6 * times))
    assert fit.gamma == pytest.approx(58.6, rel=1e-6)
    assert fit.amplitude == pytest.approx(1000.0, rel=1e-6)
    assert fit.residual < 1e-6


def test_constant_counts_give_zero_rate():
    fit = fit_exponential_decay([0.0, 0.01, 0.02], [5.0, 5.0, 5.0])
    assert fit.gamma == 0.0
    assert fit.amplitude == 5.0


def test_decay_fit_validation():
    with pytest.raises(DegenerateFitError):
        fit_exponential_decay([0.01, 0.01, 0.01], [3.0, 2.0, 1.0])
    with pytest.raises(DegenerateFitError):
        fit_exponential_decay([0.0, 0.01, 0.01], [3.0, 2.0, 1.0])
    with pytest.raises(InvalidParameterError):
        fit_exponential_decay([0.0, 0.01], [3.0, 2.0])
    with pytest.raises(InvalidParameterError):
        fit_exponential_decay([0.0, 0.01, 0.02], [3.0, 0.0, 1.0])


@pytest.mark.slow
def test_noisy_decay_recovered_within_ten_percent():
    times = np.linspace(0.0, 0.05, 20)
    for seed in range(100):
        fit = fit_exponential_decay(times, synthetic_decay(58.6, times, 0.05, seed))
        assert fit.gamma == pytest.approx(58.6, rel=0.10)
