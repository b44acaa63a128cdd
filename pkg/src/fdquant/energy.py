"""
Circuit power consumption of the AP and the users, and energy efficiency.

Per-converter powers follow the usual figure-of-merit laws: a DAC costs a
static term growing as ``2**b`` plus a term linear in rate and bits; an ADC
costs ``c_e * f_r * 2**b``. Everything else is a fixed per-chain budget read
from a circuit profile (see ``data/circuit_default.cfg``).
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .scenario import ScenarioConfig

__all__ = [
    "PowerModel",
    "PowerBreakdown",
    "dac_power",
    "adc_power",
    "total_power",
    "energy_efficiency",
    "load_power_model",
    "default_power_model",
]


@dataclass(frozen=True)
class PowerModel:
    """Circuit constants in W (``c_e`` in J, rates in Hz)."""

    p_lo: float
    p_lp: float
    p_m: float
    p_h: float
    p_lna: float
    p_lna_ue: float
    p_agc: float
    p_bb: float
    kappa_pa: float
    c_e: float
    f_s: float
    f_r: float

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if not 0 < self.kappa_pa <= 1:
            raise ValueError("kappa_pa must lie in (0, 1]")


def _finite_bits(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("converter power is only defined for finite bit counts")
    if np.any(b < 1):
        raise ValueError("bits must be >= 1")
    return b


def dac_power(bits, f_s: float):
    """``1.5e-5 * 2**b + 9e-12 * f_s * b`` watts per DAC."""
    b = _finite_bits(bits)
    out = 1.5e-5 * 2.0**b + 9e-12 * f_s * b
    return float(out) if out.ndim == 0 else out


def adc_power(bits, f_r: float, c_e: float):
    """``c_e * f_r * 2**b`` watts per ADC."""
    b = _finite_bits(bits)
    out = c_e * f_r * 2.0**b
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PowerBreakdown:
    p_ap_tx: float
    p_ap_rx: float
    p_ue: float

    @property
    def p_ap(self) -> float:
        return self.p_ap_tx + self.p_ap_rx

    @property
    def total(self) -> float:
        return self.p_ap + self.p_ue


def total_power(config: ScenarioConfig, pm: PowerModel, breakdown: bool = False):
    """AP and user power consumption ``(p_ap, p_ue)`` in watts.

    Each converter pair (I and Q) contributes two converters, so per-antenna
    bit lists are summed twice. The AP amplifier draws ``P_D / kappa_pa`` in
    total and each UL user's amplifier ``P_U / kappa_pa``.
    """
    chain = 2 * pm.p_lp + 2 * pm.p_m + pm.p_h
    p_dac = np.sum(dac_power(np.asarray(config.b_dac), pm.f_s))
    p_adc = np.sum(adc_power(np.asarray(config.b_adc), pm.f_r, pm.c_e))
    p_tx = (pm.p_lo + config.n_tx * chain + config.p_dl_w / pm.kappa_pa
            + 2 * config.n_tx * pm.p_agc + 2 * p_dac + pm.p_bb)
    p_rx = (pm.p_lo + config.n_rx * (chain + pm.p_lna)
            + 2 * config.n_rx * pm.p_agc + 2 * p_adc + pm.p_bb)
    ue_common = pm.p_lo + chain + 2 * pm.p_agc + pm.p_bb
    p_ue = (config.k_dl * (ue_common + pm.p_lna_ue)
            + config.k_ul * (ue_common + config.p_ul_w / pm.kappa_pa))
    out = PowerBreakdown(float(p_tx), float(p_rx), float(p_ue))
    return out if breakdown else (out.p_ap, out.p_ue)


def energy_efficiency(sum_se: float, p_ap: float, p_ue: float) -> float:
    """Sum SE per consumed watt (bits/Joule/Hz)."""
    den = p_ap + p_ue
    if not den > 0:
        raise ZeroDivisionError("total power consumption must be positive")
    return sum_se / den


def _model_from_section(section) -> PowerModel:
    names = {f.name for f in dataclasses.fields(PowerModel)}
    unknown = set(section) - names
    if unknown:
        raise KeyError(f"unknown power-model keys: {sorted(unknown)}")
    missing = names - set(section)
    if missing:
        raise KeyError(f"power profile lacks {sorted(missing)}")
    return PowerModel(**{k: float(section[k]) for k in names})


def default_power_model() -> PowerModel:
    text = resources.files("fdquant").joinpath("data/circuit_default.cfg").read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    return _model_from_section(parser["power"])


def load_power_model(path=None) -> PowerModel:
    """Read a ``[power]`` section; keys absent from the file keep their defaults.

    ``path=None`` returns the shipped profile.
    """
    base = default_power_model()
    if path is None:
        return base
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(Path(path)):
        raise FileNotFoundError(f"cannot read power profile {path}")
    if not parser.has_section("power"):
        raise KeyError(f"{path} has no [power] section")
    values = dataclasses.asdict(base)
    values.update({k: v for k, v in parser["power"].items()})
    return _model_from_section(values)
