"""
Truncated two-mode Fock space.

Basis index of |n_minus, n_plus> is n_minus * (n_max + 1) + n_plus. Operators and
density matrices are dense complex arrays; at the cutoffs used here (n_max <= ~20)
the two-mode space has at most a few hundred states.
"""
import logging
import math
import warnings
from typing import Optional

import numpy as np
from scipy.stats import binom

from zenoifm.errors import DimensionMismatchError, InvalidParameterError, TruncationWarning
from zenoifm.models import DensityMatrix, FockCutoff, FockWeights, OperatorSet

logger = logging.getLogger(__name__)

TAIL_TARGET = 1e-8  # default cutoff rule
TAIL_WARNING = 1e-6


def single_mode_annihilation(n_max: int) -> np.ndarray:
    """<n-1|a|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def build_operators(cutoff: FockCutoff) -> OperatorSet:
    """Annihilation operators of the m = -1 and m = +1 modes on the two-mode space."""
    a = single_mode_annihilation(cutoff.n_max)
    eye = np.eye(cutoff.mode_dim, dtype=complex)
    return OperatorSet(
        a_minus=np.kron(a, eye),
        a_plus=np.kron(eye, a),
        identity=np.eye(cutoff.dim, dtype=complex),
        cutoff=cutoff,
    )


def default_cutoff(ratio: float, tail: float = TAIL_TARGET) -> FockCutoff:
    """Smallest n_max with ratio**(n_max + 1) < tail for geometric weights."""
    if not 0.0 <= ratio < 1.0:
        raise InvalidParameterError(f"geometric ratio must lie in [0, 1), got {ratio}")
    if ratio == 0.0:
        return FockCutoff(0)
    return FockCutoff(int(math.floor(math.log(tail) / math.log(ratio))))


def _geometric_weights(ratio: float, cutoff: Optional[FockCutoff]) -> FockWeights:
    if cutoff is None:
        cutoff = default_cutoff(ratio)
    n = np.arange(cutoff.mode_dim)
    if ratio == 0.0:
        raw = (n == 0).astype(float)
        tail = 0.0
    else:
        raw = np.exp(n * math.log(ratio) + math.log1p(-ratio))
        tail = ratio ** cutoff.mode_dim
    if tail > TAIL_WARNING:
        warnings.warn(
            f"cutoff n_max={cutoff.n_max} discards tail mass {tail:.3e}; increase the cutoff",
            TruncationWarning,
            stacklevel=3,
        )
    logger.debug("geometric weights: ratio=%.6g n_max=%d tail=%.3e", ratio, cutoff.n_max, tail)
    return FockWeights.normalized(raw, tail_mass=tail)


def thermal_weights(n_mean: float, cutoff: Optional[FockCutoff] = None) -> FockWeights:
    """w_n proportional to n_mean**n / (1 + n_mean)**(n + 1), renormalised over the cutoff."""
    if n_mean < 0 or not math.isfinite(n_mean):
        raise InvalidParameterError(f"mean occupation must be finite and nonnegative, got {n_mean}")
    return _geometric_weights(n_mean / (1.0 + n_mean), cutoff)


def tmsv_weights(xi: float, cutoff: Optional[FockCutoff] = None) -> FockWeights:
    """Diagonal weights tanh(xi)**(2n) / cosh(xi)**2 of either mode of the pair state."""
    if xi < 0:
        raise InvalidParameterError(f"squeezing parameter must be nonnegative, got {xi}")
    return _geometric_weights(math.tanh(xi) ** 2, cutoff)


def tmsv_state(xi: float, cutoff: Optional[FockCutoff] = None) -> DensityMatrix:
    """Pure pair state sum_n (-i tanh xi)**n / cosh xi |n>|n>, truncated and renormalised."""
    weights = tmsv_weights(xi, cutoff)
    cutoff = cutoff or FockCutoff(weights.n_max)
    n = np.arange(cutoff.mode_dim)
    amplitudes = np.sqrt(weights.w) * (-1j) ** n
    psi = np.zeros(cutoff.dim, dtype=complex)
    psi[n * cutoff.mode_dim + n] = amplitudes
    return DensityMatrix(np.outer(psi, psi.conj()), cutoff)


def vacuum_state(cutoff: FockCutoff) -> DensityMatrix:
    data = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    data[0, 0] = 1.0
    return DensityMatrix(data, cutoff)


def fock_state(n_minus: int, n_plus: int, cutoff: FockCutoff) -> DensityMatrix:
    if max(n_minus, n_plus) > cutoff.n_max or min(n_minus, n_plus) < 0:
        raise InvalidParameterError("occupation outside the cutoff")
    data = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    index = n_minus * cutoff.mode_dim + n_plus
    data[index, index] = 1.0
    return DensityMatrix(data, cutoff)


def expectation(op: np.ndarray, rho: DensityMatrix) -> complex:
    """Tr(op rho)."""
    if op.shape != rho.data.shape:
        raise DimensionMismatchError(f"operator shape {op.shape} does not match state {rho.data.shape}")
    return complex(np.einsum("ij,ji->", op, rho.data))


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.einsum("ij,ji->", rho.data, rho.data)))


def mode_populations(rho: DensityMatrix, mode: str = "plus") -> FockWeights:
    """Diagonal of the reduced density matrix of one mode."""
    d = rho.cutoff.mode_dim
    tensor = rho.data.reshape(d, d, d, d)  # (n-, n+, m-, m+)
    if mode == "plus":
        reduced = np.einsum("ijik->jk", tensor)
    elif mode == "minus":
        reduced = np.einsum("ijkj->ik", tensor)
    else:
        raise InvalidParameterError(f"mode must be 'plus' or 'minus', got {mode!r}")
    return FockWeights.normalized(np.real(np.diag(reduced)))


def attenuate_weights(weights: FockWeights, efficiency: float) -> FockWeights:
    """Binomial thinning w'_j = sum_n w_n C(n, j) eta**j (1 - eta)**(n - j)."""
    if not 0.0 <= efficiency <= 1.0:
        raise InvalidParameterError(f"efficiency must lie in [0, 1], got {efficiency}")
    if efficiency == 1.0:
        return weights
    n = np.arange(weights.w.size)
    kernel = binom.pmf(n[None, :], n[:, None], efficiency)
    return FockWeights.normalized(weights.w @ kernel, tail_mass=weights.tail_mass)
