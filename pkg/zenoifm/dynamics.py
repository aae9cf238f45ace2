"""
Pair creation with one-mode loss.

H = delta (N_-1 + N_+1) + omega (a_-1^dag a_+1^dag + a_+1 a_-1), hbar = 1, loss rate gamma
on the m = -1 mode. Because H is quadratic and the loss linear, the moments N_-1, N_+1,
u, v obey a closed set of four linear ODEs, which serve as the oracle for the full
master-equation propagation.
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Callable, Optional, Sequence

import numpy as np

from zenoifm.errors import CutoffOverflowError, DimensionMismatchError, InvalidParameterError, StepSizeError
from zenoifm.fockspace import build_operators, expectation
from zenoifm.models import DensityMatrix, MomentState, OperatorSet, SpinDynamicsParams

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-6
TRACE_DRIFT_TOL = 1e-8
CONVERGENCE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MomentTrajectory:
    times: np.ndarray
    values: np.ndarray  # columns: n_minus, n_plus, v, u

    def __len__(self) -> int:
        return self.times.size

    def at(self, index: int) -> MomentState:
        return MomentState(*(float(value) for value in self.values[index]))

    @property
    def final(self) -> MomentState:
        return self.at(-1)

    @property
    def n_plus(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def n_minus(self) -> np.ndarray:
        return self.values[:, 0]


@dataclass(frozen=True, eq=False)
class DensityTrajectory:
    times: np.ndarray
    states: list = field(default_factory=list)
    completed: bool = True  # False when stopped at the cutoff boundary
    trace_drift: float = 0.0  # cumulative |Tr rho - 1| removed by renormalisation

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


def _rk4_step(f: Callable, y, h: float):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_plan(params: SpinDynamicsParams, refine: int = 1) -> tuple[int, float]:
    """Number of steps and step length landing exactly on t_final (dt is an upper bound)."""
    n_steps = params.n_steps * refine
    if n_steps == 0:
        return 0, 0.0
    return n_steps, params.t_final / n_steps


def _sample_steps(n_steps: int, sample_every: int) -> set:
    steps = set(range(0, n_steps + 1, sample_every))
    steps.add(n_steps)
    return steps


def build_hamiltonian(params: SpinDynamicsParams, ops: OperatorSet) -> np.ndarray:
    """Pair-creation Hamiltonian in rad/s."""
    if ops.a_minus.shape != ops.a_plus.shape or ops.a_minus.shape[0] != ops.a_minus.shape[1]:
        raise DimensionMismatchError("mode operators must be square and of equal shape")
    pair = ops.a_minus.conj().T @ ops.a_plus.conj().T
    number = ops.n_minus + ops.n_plus
    return params.delta * number + params.omega * (pair + pair.conj().T)


def _lindblad_generator(H: np.ndarray, gamma: float, ops: OperatorSet) -> Callable:
    a = ops.a_minus
    a_dag = a.conj().T
    occupation = np.real(np.diag(ops.n_minus))  # a^dag a is diagonal

    def rhs(rho: np.ndarray) -> np.ndarray:
        drho = -1j * (H @ rho - rho @ H)
        if gamma:
            drho += gamma * (a @ rho @ a_dag)
            drho -= 0.5 * gamma * (occupation[:, None] * rho + rho * occupation[None, :])
        return drho

    return rhs


def lindblad_rhs(rho: DensityMatrix, H: np.ndarray, gamma: float, ops: OperatorSet) -> np.ndarray:
    """-i[H, rho] + (gamma/2)(2 a rho a^dag - a^dag a rho - rho a^dag a) for a = a_-1."""
    if H.shape != rho.data.shape or ops.a_minus.shape != rho.data.shape:
        raise DimensionMismatchError(
            f"state {rho.data.shape}, Hamiltonian {H.shape} and operators {ops.a_minus.shape} disagree"
        )
    return _lindblad_generator(H, gamma, ops)(rho.data)


def moments_from_density(rho: DensityMatrix, ops: OperatorSet) -> MomentState:
    """N_-1, N_+1 and u = Re<a^dag a^dag>, v = Im<a^dag a^dag>."""
    pair = expectation(ops.a_minus.conj().T @ ops.a_plus.conj().T, rho)
    return MomentState(
        n_minus=expectation(ops.n_minus, rho).real,
        n_plus=expectation(ops.n_plus, rho).real,
        v=pair.imag,
        u=pair.real,
    )


def evolve_density(
    rho0: DensityMatrix,
    params: SpinDynamicsParams,
    sample_every: Optional[int] = None,
    boundary_tol: float = BOUNDARY_TOL,
    trace_tol: float = TRACE_DRIFT_TOL,
    on_overflow: str = "raise",
) -> DensityTrajectory:
    """
    Propagate the master equation with fixed-step RK4.

    Each step is re-Hermitised and renormalised. By default about 100 samples are kept.
    on_overflow="stop" ends the trajectory at the first step whose population on the
    cutoff boundary exceeds boundary_tol instead of raising CutoffOverflowError.
    """
    if on_overflow not in ("raise", "stop"):
        raise InvalidParameterError(f"on_overflow must be 'raise' or 'stop', got {on_overflow!r}")
    cutoff = rho0.cutoff
    ops = build_operators(cutoff)
    rhs = _lindblad_generator(build_hamiltonian(params, ops), params.gamma, ops)
    n_steps, h = _step_plan(params)
    stride = sample_every or max(1, n_steps // 100)
    keep = _sample_steps(n_steps, stride)

    d = cutoff.mode_dim
    edge = np.zeros((d, d), dtype=bool)
    edge[-1, :] = edge[:, -1] = True
    edge = edge.ravel() if cutoff.n_max > 0 else np.zeros(cutoff.dim, dtype=bool)

    rho = rho0.data.astype(complex)
    times = [0.0]
    states = [rho0]
    drift_total = 0.0
    completed = True
    for step in range(1, n_steps + 1):
        rho = _rk4_step(rhs, rho, h)
        rho = 0.5 * (rho + rho.conj().T)
        trace = float(np.real(np.trace(rho)))
        drift = abs(trace - 1.0)
        if drift > trace_tol:
            raise StepSizeError(f"trace drift {drift:.3e} in one step at t={step * h:.6g} s; reduce dt")
        drift_total += drift
        rho /= trace

        boundary = float(np.real(np.diag(rho))[edge].sum())
        if boundary > boundary_tol:
            message = f"population {boundary:.3e} on cutoff n_max={cutoff.n_max} at t={step * h:.6g} s"
            if on_overflow == "raise":
                raise CutoffOverflowError(message)
            logger.warning("Stopping master-equation run: %s", message)
            completed = False
            break

        if step in keep:
            times.append(step * h)
            states.append(DensityMatrix(rho.copy(), cutoff))

    logger.debug("master equation: %d steps, cumulative trace drift %.3e", n_steps, drift_total)
    return DensityTrajectory(np.array(times), states, completed, drift_total)


def _moment_rhs(params: SpinDynamicsParams) -> Callable:
    omega, gamma, delta = params.omega, params.gamma, params.delta

    def rhs(y: np.ndarray) -> np.ndarray:
        n_minus, n_plus, v, u = y
        return np.array([
            -gamma * n_minus + 2.0 * omega * v,
            2.0 * omega * v,
            -0.5 * gamma * v + omega * (1.0 + n_minus + n_plus) + 2.0 * delta * u,
            -0.5 * gamma * u - 2.0 * delta * v,
        ])

    return rhs


def _integrate_moments(params: SpinDynamicsParams, refine: int, sample_every: int) -> MomentTrajectory:
    rhs = _moment_rhs(params)
    n_steps, h = _step_plan(params, refine)
    keep = _sample_steps(n_steps, sample_every * refine)
    y = MomentState.vacuum().as_array()
    times, values = [0.0], [y]
    for step in range(1, n_steps + 1):
        y = _rk4_step(rhs, y, h)
        if step in keep:
            times.append(step * h)
            values.append(y)
    return MomentTrajectory(np.array(times), np.array(values))


def evolve_moments(
    params: SpinDynamicsParams,
    sample_every: int = 1,
    check_convergence: bool = False,
) -> MomentTrajectory:
    """
    Integrate the four moment equations from the vacuum with fixed-step RK4.

    With check_convergence, the run is repeated at half the step and StepSizeError is
    raised if N_+1(t_final) moves by more than 1e-8 relative.
    """
    trajectory = _integrate_moments(params, 1, sample_every)
    if check_convergence and len(trajectory) > 1:
        coarse = trajectory.final.n_plus
        fine = _integrate_moments(params, 2, sample_every).final.n_plus
        scale = max(abs(coarse), abs(fine))
        if scale > 0 and abs(fine - coarse) > CONVERGENCE_TOL * scale:
            raise StepSizeError(
                f"halving dt changes N_+1(t_final) by {abs(fine - coarse) / scale:.3e} relative; reduce dt"
            )
    return trajectory


def mean_pairs_closed_form(omega: float, t):
    """<N_+1> = sinh^2(omega t) without loss or detuning."""
    t = np.asarray(t, dtype=float)
    if omega < 0 or np.any(t < 0):
        raise InvalidParameterError("omega and t must be nonnegative")
    value = np.sinh(omega * t) ** 2
    return float(value) if value.ndim == 0 else value


def _final_n_plus(params: SpinDynamicsParams) -> float:
    return _integrate_moments(params, 1, max(1, params.n_steps)).final.n_plus


def _map(func: Callable, items: list, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with Pool(workers) as pool:
            return pool.map(func, items)
    return [func(item) for item in items]


def zeno_sweep(
    base: SpinDynamicsParams, gamma_grid: Sequence[float], workers: int = 1
) -> list[tuple[float, float]]:
    """N_+1(t_final) for each loss rate, sorted by gamma."""
    grid = sorted(float(g) for g in gamma_grid)
    if not grid:
        raise InvalidParameterError("gamma grid is empty")
    if grid[0] < 0:
        raise InvalidParameterError("loss rates must be nonnegative")
    results = _map(_final_n_plus, [base.with_gamma(g) for g in grid], workers)
    logger.info("Zeno sweep over %d loss rates done", len(grid))
    return list(zip(grid, results))


def resonance_scan(
    base: SpinDynamicsParams, delta_grid: Sequence[float], workers: int = 1
) -> list[tuple[float, float]]:
    """N_+1(t_final) across detuning at the base loss rate, sorted by delta."""
    grid = sorted(float(d) for d in delta_grid)
    if not grid:
        raise InvalidParameterError("detuning grid is empty")
    runs = [SpinDynamicsParams(base.omega, base.gamma, d, base.t_final, base.dt) for d in grid]
    return list(zip(grid, _map(_final_n_plus, runs, workers)))


def zeno_suppression(base: SpinDynamicsParams, gamma: float) -> float:
    """N_+1(t_final; gamma) / N_+1(t_final; 0)."""
    reference = _final_n_plus(base.with_gamma(0.0))
    if reference == 0:
        raise InvalidParameterError("no pair creation without loss; suppression undefined")
    return _final_n_plus(base.with_gamma(gamma)) / reference
