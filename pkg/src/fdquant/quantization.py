"""
Additive quantization noise model (AQNM) for the AP's DACs and ADCs.

A b-bit converter driven by a Gaussian input ``x`` is linearized as
``Q(x) = alpha * x + q`` where ``beta = 1 - alpha`` is the normalized
mean-squared distortion and ``q`` is uncorrelated with ``x`` with variance
``alpha * beta * E|x|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "LLOYD_MAX_BETA",
    "Quantizer",
    "quant_distortion_beta",
    "analytic_beta",
    "dac_noise_covariance",
    "adc_input_covariance",
    "adc_noise_covariance",
    "lloyd_max",
    "lloyd_max_quantize",
]

#: Normalized distortion of the optimal non-uniform quantizer for a
#: unit-variance Gaussian, b = 1..5 bits.
LLOYD_MAX_BETA = {1: 0.3634, 2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}

_ANALYTIC_CONST = math.pi * math.sqrt(3.0) / 2.0


def _check_bits(bits: float) -> float:
    bits = float(bits)
    if math.isnan(bits) or bits <= 0:
        raise ValueError(f"number of bits must be positive, got {bits}")
    return bits


def analytic_beta(bits: float) -> float:
    """High-resolution approximation ``(pi*sqrt(3)/2) * 2**(-2b)``.

    Valid for any positive (also fractional) bit count; ``inf`` gives 0.
    """
    bits = _check_bits(bits)
    if math.isinf(bits):
        return 0.0
    return _ANALYTIC_CONST * 2.0 ** (-2.0 * bits)


def quant_distortion_beta(bits: float) -> float:
    """Distortion factor used in the simulation path.

    Tabulated Lloyd-Max values for ``bits <= 5``, the high-resolution
    approximation above that, and exactly 0 for ``bits = inf``.
    """
    bits = _check_bits(bits)
    if math.isinf(bits):
        return 0.0
    if bits <= 5:
        if bits != int(bits) or bits < 1:
            raise ValueError(f"tabulated distortion needs an integer 1..5 bits, got {bits}")
        return LLOYD_MAX_BETA[int(bits)]
    return _ANALYTIC_CONST * 2.0 ** (-2.0 * bits)


@dataclass(frozen=True)
class Quantizer:
    """A bank of converters with per-converter resolution.

    Attributes
    ----------
    bits : tuple of float
        Resolution of each converter pair (I/Q); ``inf`` is lossless.
    alpha, beta : ndarray
        Loss and distortion factors, ``alpha + beta == 1`` elementwise.
    """

    bits: tuple
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def from_bits(cls, bits, n: int | None = None) -> "Quantizer":
        if np.ndim(bits) == 0:
            if n is None:
                raise ValueError("scalar bits need the converter count n")
            bits = (float(bits),) * n
        bits = tuple(float(b) for b in bits)
        beta = np.array([quant_distortion_beta(b) for b in bits])
        alpha = 1.0 - beta
        alpha.setflags(write=False)
        beta.setflags(write=False)
        return cls(bits, alpha, beta)

    @property
    def size(self) -> int:
        return len(self.bits)

    @property
    def phi_alpha(self) -> np.ndarray:
        return np.diag(self.alpha)

    @property
    def phi_beta(self) -> np.ndarray:
        return np.diag(self.beta)

    @property
    def is_lossless(self) -> bool:
        return bool(np.all(self.beta == 0.0))


def dac_noise_covariance(w: np.ndarray, p_dl: float, q: Quantizer) -> np.ndarray:
    """Covariance of the DAC quantization noise for precoder ``w``.

    ``R = diag(alpha) diag(beta) diag(P_D W W^H)``.
    """
    w = np.atleast_2d(w)
    if w.shape[0] != q.size:
        raise ValueError(f"precoder has {w.shape[0]} rows but quantizer has {q.size} DACs")
    tx_power = p_dl * np.sum(np.abs(w) ** 2, axis=1)
    return np.diag(q.alpha * q.beta * tx_power)


def adc_input_covariance(ch, w, p_dl, p_ul, sigma2_ul, q_dac: Quantizer) -> np.ndarray:
    """Covariance of the analog received vector after analog SIC.

    Sum of the UL signal, the SI of the quantized DL signal (its linear
    part and the DAC noise) and thermal noise.
    """
    h_ul, g_si = ch.h_ul, ch.g_si
    if g_si.shape != (h_ul.shape[0], q_dac.size) or w.shape[0] != q_dac.size:
        raise ValueError("inconsistent channel / precoder / DAC dimensions")
    gphi = g_si * q_dac.alpha[None, :]
    gw = gphi @ w
    r_qdac = dac_noise_covariance(w, p_dl, q_dac)
    cov = (p_ul * h_ul @ h_ul.conj().T
           + p_dl * gw @ gw.conj().T
           + g_si @ r_qdac @ g_si.conj().T
           + sigma2_ul * np.eye(h_ul.shape[0]))
    return 0.5 * (cov + cov.conj().T)


def adc_noise_covariance(r_cov: np.ndarray, q: Quantizer) -> np.ndarray:
    """ADC quantization-noise covariance ``diag(alpha) diag(beta) diag(r_cov)``."""
    d = np.real(np.diag(r_cov))
    if np.any(d < 0):
        raise ValueError("input covariance has a negative diagonal entry")
    if d.size != q.size:
        raise ValueError(f"covariance of size {d.size} for {q.size} ADCs")
    return np.diag(q.alpha * q.beta * d)


# -- Lloyd-Max reference quantizer (test oracle) ----------------------------

@lru_cache(maxsize=None)
def lloyd_max(bits: int, tol: float = 1e-13, max_iter: int = 200_000):
    """Optimal MSE quantizer for a unit-variance real Gaussian.

    Runs the Lloyd fixed-point iteration (centroid / midpoint conditions).

    Returns
    -------
    thresholds : ndarray, shape (2**bits - 1,)
    levels : ndarray, shape (2**bits,)
    distortion : float
        Mean-squared error, equal to beta for unit input power.
    """
    from scipy import stats  # deferred: only this oracle needs it, and it is slow to import

    n = 2 ** int(bits)
    levels = stats.norm.ppf((np.arange(n) + 0.5) / n)
    for _ in range(max_iter):
        t = 0.5 * (levels[1:] + levels[:-1])
        edges = np.concatenate(([-np.inf], t, [np.inf]))
        mass = np.diff(stats.norm.cdf(edges))
        new = (stats.norm.pdf(edges[:-1]) - stats.norm.pdf(edges[1:])) / mass
        step = np.max(np.abs(new - levels))
        levels = new
        if step < tol:
            break
    t = 0.5 * (levels[1:] + levels[:-1])
    edges = np.concatenate(([-np.inf], t, [np.inf]))
    mass = np.diff(stats.norm.cdf(edges))
    distortion = 1.0 - float(np.sum(mass * levels**2))
    levels.setflags(write=False)
    t.setflags(write=False)
    return t, levels, distortion


def lloyd_max_quantize(x: np.ndarray, bits: int, power) -> np.ndarray:
    """Quantize complex ``x`` with a Lloyd-Max quantizer per I/Q branch.

    ``power`` is the expected ``E|x|^2`` (scalar or broadcastable array);
    each real branch is scaled to unit variance before quantization.
    """
    t, levels, _ = lloyd_max(int(bits))
    scale = np.sqrt(np.asarray(power) / 2.0)

    def q_real(u):
        return levels[np.searchsorted(t, u / scale)] * scale

    return q_real(x.real) + 1j * q_real(x.imag)
