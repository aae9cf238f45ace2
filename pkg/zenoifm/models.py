"""Data models shared by the simulation and inference modules."""
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from zenoifm.errors import DimensionMismatchError, InvalidParameterError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8
WEIGHT_SUM_TOL = 1e-10


@dataclass(frozen=True)
class FockCutoff:
    """Maximum occupation kept per mode."""
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise InvalidParameterError(f"n_max must be a nonnegative integer, got {self.n_max!r}")

    @property
    def mode_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.mode_dim ** 2


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Mode operators on the two-mode space, index |n_minus, n_plus> -> n_minus*(n_max+1) + n_plus."""
    a_minus: np.ndarray  # annihilation, m = -1
    a_plus: np.ndarray  # annihilation, m = +1
    identity: np.ndarray
    cutoff: FockCutoff

    @property
    def n_minus(self) -> np.ndarray:
        return self.a_minus.conj().T @ self.a_minus

    @property
    def n_plus(self) -> np.ndarray:
        return self.a_plus.conj().T @ self.a_plus

    @property
    def dim(self) -> int:
        return self.identity.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Two-mode density operator in the truncated Fock basis."""
    data: np.ndarray
    cutoff: FockCutoff

    def __post_init__(self):
        expected = (self.cutoff.dim, self.cutoff.dim)
        if self.data.shape != expected:
            raise DimensionMismatchError(f"density matrix has shape {self.data.shape}, expected {expected}")

    def check_physical(self) -> None:
        """Raise InvalidParameterError unless Hermitian, unit-trace and positive within tolerance."""
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvalidParameterError("density matrix is not Hermitian")
        trace = np.trace(rho)
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidParameterError(f"density matrix trace is {trace.real:.12g}")
        lowest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        if lowest < -POSITIVITY_TOL:
            raise InvalidParameterError(f"density matrix has negative eigenvalue {lowest:.3e}")


@dataclass(frozen=True, eq=False)
class FockWeights:
    """Normalised diagonal weights w_n of one mode, n = 0..n_max."""
    w: np.ndarray
    tail_mass: float = 0.0  # probability removed by truncation before renormalisation

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidParameterError("weights must be a non-empty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidParameterError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidParameterError(f"weights sum to {w.sum():.15g}, expected 1")
        object.__setattr__(self, "w", w)

    @classmethod
    def normalized(cls, values, tail_mass: float = 0.0) -> "FockWeights":
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        return cls(values / values.sum(), tail_mass)

    @classmethod
    def fock(cls, n: int, n_max: Optional[int] = None) -> "FockWeights":
        """Single Fock state |n>."""
        w = np.zeros((n if n_max is None else n_max) + 1)
        w[n] = 1.0
        return cls(w)

    @property
    def n_max(self) -> int:
        return self.w.size - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.w.size), self.w))


@dataclass(frozen=True)
class SpinDynamicsParams:
    """Rates in rad/s (hbar = 1) and times in s."""
    omega: float  # pair-creation rate
    gamma: float = 0.0  # loss rate on m = -1
    delta: float = 0.0  # detuning (epsilon + q) / hbar
    t_final: float = 0.2
    dt: float = 1e-4

    def __post_init__(self):
        if self.omega < 0 or self.gamma < 0 or self.t_final < 0:
            raise InvalidParameterError("omega, gamma and t_final must be nonnegative")
        if self.dt <= 0:
            raise InvalidParameterError("dt must be positive")
        if self.t_final > 0 and self.dt > self.t_final:
            raise InvalidParameterError("dt must not exceed t_final")

    @classmethod
    def from_hz(cls, omega_hz: float, **kwargs) -> "SpinDynamicsParams":
        """Build from Omega quoted as 2*pi x omega_hz."""
        return cls(omega=2.0 * math.pi * omega_hz, **kwargs)

    @property
    def xi(self) -> float:
        return self.omega * self.t_final

    @property
    def n_steps(self) -> int:
        if self.t_final == 0:
            return 0
        return max(1, math.ceil(self.t_final / self.dt - 1e-9))

    def with_gamma(self, gamma: float) -> "SpinDynamicsParams":
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class MomentState:
    """N_-1, N_+1 and the pair quadratures u, v."""
    n_minus: float
    n_plus: float
    v: float
    u: float

    @classmethod
    def vacuum(cls) -> "MomentState":
        return cls(0.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.n_minus, self.n_plus, self.v, self.u])


@dataclass(frozen=True)
class DetectionModel:
    """Atom counting and displacement parameters of the homodyne readout."""
    sigma_det_atoms: float = 16.0
    transfer_fraction: float = 0.08  # cos^2(theta)
    n_condensate_mean: float = 25000.0
    n_condensate_sd: float = 1250.0

    def __post_init__(self):
        if not 0.0 < self.transfer_fraction < 1.0:
            raise InvalidParameterError("transfer_fraction must lie in (0, 1)")
        if self.n_condensate_mean <= 0:
            raise InvalidParameterError("n_condensate_mean must be positive")
        if self.sigma_det_atoms < 0 or self.n_condensate_sd < 0:
            raise InvalidParameterError("noise scales must be nonnegative")

    def shot_noise_atoms(self, n_total: Optional[float] = None) -> float:
        """Binomial standard deviation of the transferred atom number."""
        n = self.n_condensate_mean if n_total is None else n_total
        c = self.transfer_fraction
        return math.sqrt(c * (1.0 - c) * n)

    @property
    def sigma_rescaled(self) -> float:
        return self.sigma_det_atoms / self.shot_noise_atoms()

    def without_noise(self) -> "DetectionModel":
        return replace(self, sigma_det_atoms=0.0)


@dataclass(frozen=True)
class RawShot:
    """Atom numbers measured after the displacement pulse."""
    n0_after: float
    n_plus_after: float

    def __post_init__(self):
        if self.n0_after < 0 or self.n_plus_after < 0:
            raise InvalidParameterError("atom numbers must be nonnegative")

    @property
    def total(self) -> float:
        return self.n0_after + self.n_plus_after


@dataclass(frozen=True)
class RescaledSample:
    """Dimensionless homodyne result; the displaced vacuum has unit variance."""
    x: float

    def __post_init__(self):
        if not math.isfinite(self.x):
            raise InvalidParameterError("rescaled sample must be finite")


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Maximum-likelihood Fock weights with per-weight intervals."""
    weights: FockWeights
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    log_likelihood_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        w = self.weights.w
        if np.any(self.ci_lower > w + 1e-12) or np.any(self.ci_upper < w - 1e-12):
            raise InvalidParameterError("interval does not contain the estimate")

    def with_intervals(self, lower: np.ndarray, upper: np.ndarray) -> "ReconstructionResult":
        w = self.weights.w
        return replace(self, ci_lower=np.minimum(lower, w), ci_upper=np.maximum(upper, w))


@dataclass(frozen=True)
class Posteriors:
    """Posterior probabilities for a single homodyne result."""
    p_no: float  # object absent
    p_ifm: float  # object present, no interaction
    p_int: float  # object present, interaction occurred

    def __post_init__(self):
        for value in (self.p_no, self.p_ifm, self.p_int):
            if not -1e-12 <= value <= 1.0 + 1e-12:
                raise InvalidParameterError(f"posterior {value} outside [0, 1]")
        if abs(self.p_no + self.p_ifm + self.p_int - 1.0) > 1e-10:
            raise InvalidParameterError("posteriors do not sum to 1")

    @property
    def p_ifm_vetoed(self) -> float:
        """Confidence in an interaction-free detection when interactions are detected externally."""
        denom = self.p_ifm + self.p_no
        return self.p_ifm / denom if denom > 0 else 0.0


@dataclass(frozen=True)
class DiscriminationReport:
    """Threshold decision rule and the resulting figure of merit."""
    threshold_L: float
    confidence_with: float  # P(|x| <= L | object, interaction-free branch)
    confidence_without: float  # P(|x| > L | no object)
    p_interaction: float
    eta: float
    p_detect: float = 0.0
    p_inconclusive: float = 0.0

    def __post_init__(self):
        if self.threshold_L < 0:
            raise InvalidParameterError("threshold must be nonnegative")
        for value in (self.confidence_with, self.confidence_without, self.p_interaction,
                      self.eta, self.p_detect, self.p_inconclusive):
            if not -1e-12 <= value <= 1.0 + 1e-12:
                raise InvalidParameterError(f"probability {value} outside [0, 1]")

    @property
    def confidence(self) -> float:
        return 0.5 * (self.confidence_with + self.confidence_without)
