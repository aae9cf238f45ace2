import math

import numpy as np
import pytest

from zenoifm.dynamics import (
    build_hamiltonian,
    evolve_density,
    evolve_moments,
    lindblad_rhs,
    mean_pairs_closed_form,
    moments_from_density,
    resonance_scan,
    zeno_suppression,
    zeno_sweep,
)
from zenoifm.errors import CutoffOverflowError, InvalidParameterError
from zenoifm.fockspace import build_operators, tmsv_state, vacuum_state
from zenoifm.models import FockCutoff, SpinDynamicsParams

LAB_OMEGA = 2 * math.pi * 3.6


def test_step_count_lands_on_final_time():
    params = SpinDynamicsParams(omega=1.0, t_final=0.25, dt=0.1)
    assert params.n_steps == 3
    assert SpinDynamicsParams(omega=1.0, t_final=0.2, dt=1e-4).n_steps == 2000
    assert SpinDynamicsParams(omega=1.0, t_final=0.0).n_steps == 0


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        SpinDynamicsParams(omega=-1.0)
    with pytest.raises(InvalidParameterError):
        SpinDynamicsParams(omega=1.0, dt=0.0)
    with pytest.raises(InvalidParameterError):
        SpinDynamicsParams(omega=1.0, t_final=0.01, dt=0.1)
    assert SpinDynamicsParams.from_hz(1.0).omega == pytest.approx(2 * math.pi)


def test_moments_start_from_vacuum():
    trajectory = evolve_moments(SpinDynamicsParams(omega=1.0, t_final=0.0))
    assert len(trajectory) == 1
    assert trajectory.final.n_plus == 0.0


def test_moments_follow_sinh_squared_growth():
    params = SpinDynamicsParams(omega=10.0, t_final=0.3, dt=1e-4)
    trajectory = evolve_moments(params, sample_every=100, check_convergence=True)
    expected = mean_pairs_closed_form(params.omega, trajectory.times)
    assert np.allclose(trajectory.n_plus, expected, rtol=1e-6, atol=1e-12)
    assert np.allclose(trajectory.n_minus, trajectory.n_plus, rtol=1e-12)


def test_closed_form_scalar_and_validation():
    assert mean_pairs_closed_form(2.0, 0.0) == 0.0
    assert mean_pairs_closed_form(2.0, 0.5) == pytest.approx(math.sinh(1.0) ** 2)
    with pytest.raises(InvalidParameterError):
        mean_pairs_closed_form(1.0, -0.1)


def test_loss_only_depletes_the_lossy_mode():
    final = evolve_moments(SpinDynamicsParams(omega=5.0, gamma=20.0, t_final=0.2, dt=1e-4)).final
    assert final.n_minus < final.n_plus


def test_lindblad_generator_preserves_trace_and_hermiticity():
    cutoff = FockCutoff(6)
    ops = build_operators(cutoff)
    rho = tmsv_state(0.3, cutoff)
    H = build_hamiltonian(SpinDynamicsParams(omega=2.0, delta=0.5), ops)
    drho = lindblad_rhs(rho, H, 4.0, ops)
    assert abs(np.trace(drho)) < 1e-12
    assert np.allclose(drho, drho.conj().T)


@pytest.mark.parametrize("omega", [1.0, 1.5, 2.0])
@pytest.mark.parametrize("gamma", [0.0, 3.0, 20.0])
@pytest.mark.parametrize("delta", [-0.7, 0.0, 0.7])
def test_master_equation_matches_moment_equations(omega, gamma, delta):
    params = SpinDynamicsParams(omega=omega, gamma=gamma, delta=delta, t_final=0.25, dt=1e-3)
    cutoff = FockCutoff(12)
    trajectory = evolve_density(vacuum_state(cutoff), params)
    assert trajectory.completed
    from_master = moments_from_density(trajectory.final, build_operators(cutoff))
    from_moments = evolve_moments(params).final
    assert trajectory.times[-1] == pytest.approx(0.25)
    assert from_master.n_minus == pytest.approx(from_moments.n_minus, abs=1e-6)
    assert from_master.n_plus == pytest.approx(from_moments.n_plus, abs=1e-6)
    assert from_master.u == pytest.approx(from_moments.u, abs=1e-6)
    assert from_master.v == pytest.approx(from_moments.v, abs=1e-6)
    trajectory.final.check_physical()


def test_master_equation_without_loss_stays_pure():
    cutoff = FockCutoff(12)
    params = SpinDynamicsParams(omega=2.0, t_final=0.1, dt=1e-3)
    final = evolve_density(vacuum_state(cutoff), params).final
    expected = tmsv_state(params.xi, cutoff)
    assert np.allclose(final.data, expected.data, atol=1e-6)


def test_cutoff_overflow_raises_or_stops():
    params = SpinDynamicsParams(omega=10.0, t_final=0.3, dt=1e-3)
    with pytest.raises(CutoffOverflowError):
        evolve_density(vacuum_state(FockCutoff(3)), params)
    trajectory = evolve_density(vacuum_state(FockCutoff(3)), params, on_overflow="stop")
    assert not trajectory.completed
    assert trajectory.times[-1] < 0.3
    with pytest.raises(InvalidParameterError):
        evolve_density(vacuum_state(FockCutoff(3)), params, on_overflow="ignore")


def test_zeno_sweep_is_monotone_and_strongly_suppressed():
    base = SpinDynamicsParams(omega=LAB_OMEGA, t_final=0.2, dt=1e-4)
    grid = list(range(0, 101, 5)) + [59]
    sweep = zeno_sweep(base, grid)
    gammas = [g for g, _ in sweep]
    values = [n for _, n in sweep]
    assert gammas == sorted(gammas)
    assert all(b <= a for a, b in zip(values, values[1:]))
    at_59 = dict(sweep)[59.0]
    assert at_59 < 0.05 * dict(sweep)[0.0]
    assert values[0] == pytest.approx(math.sinh(LAB_OMEGA * 0.2) ** 2, rel=1e-6)


def test_zeno_sweep_result_independent_of_workers():
    base = SpinDynamicsParams(omega=3.0, t_final=0.2, dt=1e-3)
    assert zeno_sweep(base, [0, 15, 59], workers=2) == zeno_sweep(base, [0, 15, 59], workers=1)


def test_zeno_sweep_rejects_bad_grids():
    base = SpinDynamicsParams(omega=3.0)
    with pytest.raises(InvalidParameterError):
        zeno_sweep(base, [])
    with pytest.raises(InvalidParameterError):
        zeno_sweep(base, [-1.0, 2.0])


def test_zeno_suppression_ratio():
    base = SpinDynamicsParams(omega=LAB_OMEGA, t_final=0.2, dt=1e-4)
    assert zeno_suppression(base, 0.0) == pytest.approx(1.0)
    assert zeno_suppression(base, 59.0) < 0.05


def test_resonance_scan_peaks_at_zero_detuning():
    base = SpinDynamicsParams(omega=2.0, t_final=0.5, dt=1e-3)
    scan = dict(resonance_scan(base, [100.0, -100.0, 0.0]))
    assert scan[0.0] > scan[100.0]
    assert scan[100.0] == pytest.approx(scan[-100.0], rel=1e-9)
