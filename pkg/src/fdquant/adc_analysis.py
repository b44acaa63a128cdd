"""
Closed-form ADC budget for a full-duplex single-antenna link.

With one transmit and one receive antenna and ideal DACs, the ADC input is
the UL signal plus the residual SI after analog cancellation. This module
computes the resulting quantization-noise power, the noise floor, the gap
between the ADC input power and that floor, the minimum number of ADC bits
that keeps the UL signal above the floor, and the ADC dynamic range.

Two distortion conventions coexist:

* the bit-threshold formulas (:func:`min_adc_bits`,
  :func:`resolvability_margin`, ...) use the analytic
  ``beta = (pi*sqrt(3)/2) 2**(-2b)`` for every ``b``, as their closed forms
  require;
* the operating-point functions (:func:`eta_adc`, :func:`noise_floor`, ...)
  take ``beta_mode="table"`` by default, i.e. the same Lloyd-Max table the
  simulator uses for ``b <= 5``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ci_path_loss
from .quantization import analytic_beta, quant_distortion_beta
from .scenario import dbm_to_watts, db_to_linear, watts_to_dbm

__all__ = [
    "SisoOperatingPoint",
    "beta_for",
    "eta_adc",
    "residual_power",
    "noise_floor",
    "range_gap",
    "min_adc_bits",
    "min_adc_bits_approx",
    "dynamic_range_db",
    "resolvability_margin",
    "RESOLVABILITY_THRESHOLD",
    "Table1Row",
    "generate_table1",
]

#: Bit count above which the dynamic range always exceeds the input range.
RESOLVABILITY_THRESHOLD = (math.log2(3 * math.pi)
                           - 0.5 * math.log2(3 * math.pi * math.sqrt(3) - 4) - 0.5)


def beta_for(bits: float, mode: str = "table") -> float:
    if mode == "table":
        return quant_distortion_beta(bits)
    if mode == "analytic":
        return analytic_beta(bits)
    raise ValueError(f"unknown beta mode {mode!r}")


@dataclass(frozen=True)
class SisoOperatingPoint:
    """Powers (W) and gains of the single-antenna FD link."""

    p_dl: float
    p_ul: float
    rho_ul: float
    kappa_a: float
    sigma2_ul: float
    b_adc: float

    def __post_init__(self):
        if min(self.p_dl, self.p_ul, self.rho_ul, self.sigma2_ul) < 0:
            raise ValueError("powers and gains must be non-negative")
        if not 0 < self.kappa_a <= 1:
            raise ValueError("kappa_a must lie in (0, 1]")
        if not self.b_adc >= 1:
            raise ValueError("b_adc must be >= 1")

    @classmethod
    def from_db(cls, p_dl_dbm, p_ul_dbm, rho_ul_db, kappa_a_db, sigma2_ul_dbm=-math.inf, b_adc=7):
        sigma2 = 0.0 if math.isinf(sigma2_ul_dbm) else dbm_to_watts(sigma2_ul_dbm)
        return cls(dbm_to_watts(p_dl_dbm), dbm_to_watts(p_ul_dbm), db_to_linear(rho_ul_db),
                   db_to_linear(kappa_a_db), sigma2, b_adc)

    @property
    def p_total_rx(self) -> float:
        return self.p_ul * self.rho_ul + self.p_dl * self.kappa_a

    @property
    def p_ul_rx(self) -> float:
        return self.p_ul * self.rho_ul

    def with_bits(self, b) -> "SisoOperatingPoint":
        return replace(self, b_adc=b)


def eta_adc(op: SisoOperatingPoint, beta_mode: str = "table") -> float:
    """Average ADC quantization-noise power (W)."""
    beta = beta_for(op.b_adc, beta_mode)
    alpha = 1.0 - beta
    return alpha * beta * (op.p_ul * op.rho_ul + op.p_dl * op.kappa_a + op.sigma2_ul)


def residual_power(op: SisoOperatingPoint) -> float:
    """ADC input power after analog SIC (W)."""
    return op.p_dl * op.kappa_a + op.p_ul * op.rho_ul + op.sigma2_ul


def noise_floor(op: SisoOperatingPoint, beta_mode: str = "table") -> float:
    """Post-ADC noise floor: quantization noise plus attenuated thermal noise (W)."""
    alpha = 1.0 - beta_for(op.b_adc, beta_mode)
    return eta_adc(op, beta_mode) + op.sigma2_ul * alpha**2


def range_gap(op: SisoOperatingPoint, beta_mode: str = "table") -> float:
    """Gap in dB between the ADC input power and the noise floor."""
    nf = noise_floor(op, beta_mode)
    if nf <= 0:
        raise ZeroDivisionError("noise floor is zero (lossless ADC without thermal noise)")
    return 10.0 * math.log10(residual_power(op)) - 10.0 * math.log10(nf)


def min_adc_bits(p_total_rx: float, p_ul_rx: float) -> float:
    """Fractional number of ADC bits above which the UL signal clears the noise floor.

    Requires ``p_total_rx >= 4 * p_ul_rx > 0``; at equality the bound is
    ``0.5 * log2(pi * sqrt(3))``. Callers round up to an integer count.
    """
    if not p_ul_rx > 0:
        raise ValueError("UL received power must be positive")
    if p_total_rx < 4.0 * p_ul_rx * (1.0 - 1e-12):
        raise ValueError("bound requires total received power >= 4x the UL power")
    root = math.sqrt(max(p_total_rx - 4.0 * p_ul_rx, 0.0))
    arg = (math.pi / 2.0) * math.sqrt(3.0 * p_total_rx / (4.0 * p_ul_rx**2)) * (math.sqrt(p_total_rx) + root)
    return 0.5 * math.log2(arg)


def min_adc_bits_approx(p_total_rx: float, p_ul_rx: float) -> float:
    """Large-SI approximation: half the log-ratio plus a 0.722-bit constant."""
    return 0.5 * math.log2(p_total_rx / p_ul_rx) + 0.5 * math.log2(math.pi * math.sqrt(3.0) / 2.0)


def dynamic_range_db(b_adc):
    """Approximate ADC dynamic range ``20 log10(sqrt(3/2) 2**b)`` in dB."""
    b = np.asarray(b_adc, dtype=float)
    if np.any(b < 1):
        raise ValueError("b_adc must be >= 1")
    out = 20.0 * np.log10(math.sqrt(1.5) * 2.0**b)
    return float(out) if out.ndim == 0 else out


def resolvability_margin(op: SisoOperatingPoint) -> float:
    """Dynamic range minus the input-to-floor gap (dB), analytic distortion.

    Positive means the ADC can represent the full received range.
    """
    return dynamic_range_db(op.b_adc) - range_gap(op, beta_mode="analytic")


# -- table generator ---------------------------------------------------------

@dataclass(frozen=True)
class Table1Row:
    kappa_a_db: float
    p_dl_dbm: float
    bits: int
    eta_dbm: float
    delta_db: float
    dr_db: float


def generate_table1(p_ul_dbm: float = 20.0,
                    kappa_list=(-40.0, -60.0),
                    p_dl_list=(20.0, 30.0, 40.0),
                    bits_list=(4, 5, 6, 7, 8),
                    trials: int = 10_000,
                    rng: np.random.Generator | None = None,
                    *,
                    distance_m: float = 15.0,
                    radius_m: float = 4.0,
                    carrier_ghz: float = 10.0,
                    exponent: float = 2.8) -> list[Table1Row]:
    """Quantization noise, input range and dynamic range per (kappa_a, P_D, b).

    The UL user is dropped uniformly in a disk of ``radius_m`` centred
    ``distance_m`` from the AP, with CI path loss and Rayleigh small-scale
    fading (the one-ring model degenerates to a scalar for one antenna).
    Thermal noise is ignored. ``eta`` and the range gap are averaged in the
    linear domain over ``trials`` drops and reported in dBm / dB.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    r = radius_m * np.sqrt(rng.random(trials))
    ang = rng.uniform(0, 2 * math.pi, trials)
    dist = np.hypot(distance_m + r * np.cos(ang), r * np.sin(ang))
    rho = np.asarray(ci_path_loss(np.maximum(dist, 1.0), carrier_ghz, exponent))
    fading = np.abs((rng.standard_normal(trials) + 1j * rng.standard_normal(trials)) / math.sqrt(2)) ** 2
    p_ul_rx = dbm_to_watts(p_ul_dbm) * rho * fading

    rows = []
    for kappa_db in kappa_list:
        for p_dl_dbm in p_dl_list:
            si = dbm_to_watts(p_dl_dbm) * db_to_linear(kappa_db)
            res = si + p_ul_rx
            for b in bits_list:
                beta = quant_distortion_beta(b)
                eta = (1.0 - beta) * beta * res
                delta = res / eta
                rows.append(Table1Row(float(kappa_db), float(p_dl_dbm), int(b),
                                      float(watts_to_dbm(eta.mean())),
                                      float(10.0 * math.log10(delta.mean())),
                                      dynamic_range_db(b)))
    return rows
