import math

import numpy as np
import pytest

from zenoifm.errors import DimensionMismatchError, InvalidParameterError, TruncationWarning
from zenoifm.fockspace import (
    attenuate_weights,
    build_operators,
    default_cutoff,
    expectation,
    fock_state,
    mode_populations,
    purity,
    single_mode_annihilation,
    thermal_weights,
    tmsv_state,
    tmsv_weights,
    vacuum_state,
)
from zenoifm.models import DensityMatrix, FockCutoff, FockWeights


def test_annihilation_matrix_elements():
    a = single_mode_annihilation(3)
    assert a[0, 1] == pytest.approx(1.0)
    assert a[2, 3] == pytest.approx(math.sqrt(3))
    assert a[1, 0] == 0


def test_mode_operators_commute_and_obey_canonical_relation_below_cutoff():
    ops = build_operators(FockCutoff(4))
    a, b = ops.a_minus, ops.a_plus
    assert np.allclose(a @ b - b @ a, 0)
    assert np.allclose(a @ b.conj().T - b.conj().T @ a, 0)
    commutator = a @ a.conj().T - a.conj().T @ a
    # identity everywhere except on states with n_minus = n_max
    diag = np.real(np.diag(commutator)).reshape(5, 5)
    assert np.allclose(diag[:4], 1.0)
    assert np.allclose(diag[4], -4.0)


def test_default_cutoff_rule():
    assert default_cutoff(0.5).n_max == 26
    assert 0.5 ** 27 < 1e-8
    assert default_cutoff(0.0).n_max == 0
    with pytest.raises(InvalidParameterError):
        default_cutoff(1.0)


@pytest.mark.parametrize("xi", [0.0, 0.5, 1.0, 3.1])
def test_tmsv_weights_mean(xi):
    weights = tmsv_weights(xi)
    assert weights.w.sum() == pytest.approx(1.0, abs=1e-12)
    assert weights.mean == pytest.approx(math.sinh(xi) ** 2, rel=1e-5, abs=1e-12)
    assert weights.tail_mass < 1e-8


def test_tmsv_weights_match_thermal_form():
    xi = 0.8
    pair = tmsv_weights(xi)
    thermal = thermal_weights(math.sinh(xi) ** 2, FockCutoff(pair.n_max))
    assert np.allclose(pair.w, thermal.w)


def test_truncation_warning_for_small_cutoff():
    with pytest.warns(TruncationWarning):
        weights = tmsv_weights(1.0, FockCutoff(3))
    assert weights.tail_mass > 1e-6


def test_negative_squeezing_rejected():
    with pytest.raises(InvalidParameterError):
        tmsv_weights(-0.1)
    with pytest.raises(InvalidParameterError):
        thermal_weights(-1.0)


def test_tmsv_state_is_pure_and_physical():
    cutoff = FockCutoff(10)
    rho = tmsv_state(0.4, cutoff)
    rho.check_physical()
    assert purity(rho) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(mode_populations(rho, "plus").w, tmsv_weights(0.4, cutoff).w)
    assert np.allclose(mode_populations(rho, "minus").w, tmsv_weights(0.4, cutoff).w)


def test_tmsv_state_pair_correlation():
    cutoff = FockCutoff(12)
    rho = tmsv_state(0.3, cutoff)
    ops = build_operators(cutoff)
    pair = expectation(ops.a_minus.conj().T @ ops.a_plus.conj().T, rho)
    # <a^dag a^dag> = i sinh cosh
    assert pair.real == pytest.approx(0.0, abs=1e-12)
    assert pair.imag == pytest.approx(math.sinh(0.3) * math.cosh(0.3), rel=1e-6)


def test_fock_state_and_vacuum():
    cutoff = FockCutoff(3)
    ops = build_operators(cutoff)
    rho = fock_state(2, 1, cutoff)
    assert expectation(ops.n_minus, rho).real == pytest.approx(2.0)
    assert expectation(ops.n_plus, rho).real == pytest.approx(1.0)
    assert expectation(ops.n_plus, vacuum_state(cutoff)) == 0
    with pytest.raises(InvalidParameterError):
        fock_state(4, 0, cutoff)


def test_expectation_dimension_mismatch():
    rho = vacuum_state(FockCutoff(2))
    with pytest.raises(DimensionMismatchError):
        expectation(np.eye(4), rho)


def test_density_matrix_shape_checked():
    with pytest.raises(DimensionMismatchError):
        DensityMatrix(np.eye(3), FockCutoff(1))


def test_check_physical_rejects_bad_trace():
    cutoff = FockCutoff(1)
    with pytest.raises(InvalidParameterError):
        DensityMatrix(2.0 * np.eye(cutoff.dim) / cutoff.dim, cutoff).check_physical()


def test_attenuate_single_excitation():
    thinned = attenuate_weights(FockWeights.fock(1), 0.25)
    assert np.allclose(thinned.w, [0.75, 0.25])


def test_attenuation_scales_the_mean():
    weights = thermal_weights(2.0)
    assert attenuate_weights(weights, 0.3).mean == pytest.approx(0.3 * weights.mean, rel=1e-12)
    assert attenuate_weights(weights, 1.0) is weights
    with pytest.raises(InvalidParameterError):
        attenuate_weights(weights, 1.5)


def test_fock_weights_validation():
    with pytest.raises(InvalidParameterError):
        FockWeights(np.array([0.5, 0.6]))
    with pytest.raises(InvalidParameterError):
        FockWeights(np.array([]))
    assert FockWeights.normalized([2.0, 2.0]).w.tolist() == [0.5, 0.5]
