"""
Per-user spectral efficiencies of the quantized full-duplex MU-MIMO link.

Two independent evaluations are provided:

* the direct form (:func:`downlink_se`, :func:`uplink_se`) builds every
  interference and noise term from the signal model;
* the reformulated form (:func:`downlink_se_ref`, :func:`uplink_se_ref`)
  normalizes by the transmit powers and collects the precoder-dependent
  terms into the quadratic forms used by the precoder optimizer.

They must agree to machine precision; the test-suite cross-checks them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adc_analysis import SisoOperatingPoint, noise_floor
from .channel import ChannelSet, ci_path_loss
from .quantization import Quantizer, adc_input_covariance, adc_noise_covariance, dac_noise_covariance
from .scenario import ScenarioConfig, db_to_linear

__all__ = [
    "LinkSetup",
    "BeamformerState",
    "LinkBudgetTerms",
    "calibrate_digital_sic",
    "link_budget",
    "downlink_se",
    "uplink_se",
    "downlink_se_ref",
    "uplink_se_ref",
    "sum_se",
    "psi_si",
    "psi_qn",
]

log = logging.getLogger(__name__)


def calibrate_digital_sic(config: ScenarioConfig, q_adc: Quantizer | None = None) -> float:
    """Digital SIC gain ``kappa_d`` (linear).

    In ``calibrated`` mode the residual SI after digital cancellation is
    pushed down to the post-ADC noise floor, ``P_D kappa_a kappa_d = sigma_NF^2``.
    The floor is evaluated per receive antenna with the configured ADC bits
    and an aggregate UL input of ``K_U`` users at the UL group distance,
    then averaged over antennas. The result is clamped to at most 1.
    """
    if config.kappa_d_mode == "off":
        return 1.0
    if not config.is_fd:
        return 0.0
    if config.kappa_d_mode == "explicit":
        return min(1.0, db_to_linear(config.kappa_d_db))
    kappa_a = config.kappa_a
    if not kappa_a > 0:
        raise ValueError("digital SIC calibration needs kappa_a > 0 in full-duplex mode")
    q_adc = q_adc or Quantizer.from_bits(config.b_adc)
    rho_ul = ci_path_loss(max(config.d_ul_m, 1.0), config.carrier_ghz, config.pathloss_exponent)
    floors = [
        noise_floor(SisoOperatingPoint(config.p_dl_w, config.k_ul * config.p_ul_w, rho_ul,
                                       kappa_a, config.sigma2_ul, b))
        for b in q_adc.bits
    ]
    kappa_d = float(np.mean(floors)) / (config.p_dl_w * kappa_a)
    log.debug("calibrated kappa_d = %.3f dB", 10 * math.log10(kappa_d))
    return min(1.0, kappa_d)


@dataclass(frozen=True)
class LinkSetup:
    """Linear-unit parameters shared by every SE evaluation of a scenario."""

    p_dl: float
    p_ul: float
    sigma2_dl: float
    sigma2_ul: float
    kappa_d: float
    q_dac: Quantizer
    q_adc: Quantizer
    half_duplex: bool = False
    hd_lambda: float = 0.5

    @classmethod
    def from_config(cls, config: ScenarioConfig, kappa_d: float | None = None) -> "LinkSetup":
        q_dac = Quantizer.from_bits(config.b_dac)
        q_adc = Quantizer.from_bits(config.b_adc)
        if kappa_d is None:
            kappa_d = calibrate_digital_sic(config, q_adc)
        return cls(config.p_dl_w, config.p_ul_w, config.sigma2_dl, config.sigma2_ul,
                   kappa_d if config.is_fd else 0.0, q_dac, q_adc,
                   half_duplex=not config.is_fd, hd_lambda=config.hd_lambda)


@dataclass
class BeamformerState:
    """Precoder/combiner pair and its optimization history.

    ``v_bar`` stacks the weighted precoders ``v_k = diag(alpha_DAC)^(1/2) w_k``
    and has unit norm, which is the AP power constraint.
    """

    v_bar: np.ndarray
    w: np.ndarray
    f: np.ndarray
    trace: list = field(default_factory=list)
    inner_trace: list = field(default_factory=list)
    iters_outer: int = 0
    iters_inner: list = field(default_factory=list)
    residual: float = float("nan")

    @classmethod
    def from_stacked(cls, v_bar: np.ndarray, f: np.ndarray, q_dac: Quantizer, **kw) -> "BeamformerState":
        v_bar = np.asarray(v_bar, dtype=complex)
        v_bar = v_bar / np.linalg.norm(v_bar)
        return cls(v_bar=v_bar, w=stacked_to_precoder(v_bar, q_dac), f=f, **kw)

    @property
    def iters_inner_total(self) -> int:
        return int(sum(self.iters_inner))


def stacked_to_precoder(v_bar: np.ndarray, q_dac: Quantizer) -> np.ndarray:
    n = q_dac.size
    v = np.asarray(v_bar).reshape(-1, n).T
    return v / np.sqrt(q_dac.alpha)[:, None]


def precoder_to_stacked(w: np.ndarray, q_dac: Quantizer) -> np.ndarray:
    return (np.sqrt(q_dac.alpha)[:, None] * w).T.reshape(-1)


@dataclass(frozen=True)
class LinkBudgetTerms:
    """Received powers (W) per user that enter the SINR expressions."""

    dl_signal: np.ndarray
    dl_iui: np.ndarray
    dl_qn_dac: np.ndarray
    dl_cci: np.ndarray
    dl_noise: np.ndarray
    ul_signal: np.ndarray
    ul_iui: np.ndarray
    ul_qn_adc: np.ndarray
    ul_si: np.ndarray
    ul_noise: np.ndarray

    @property
    def dl_sinr(self) -> np.ndarray:
        den = self.dl_iui + self.dl_qn_dac + self.dl_cci + self.dl_noise
        return _ratio(self.dl_signal, den)

    @property
    def ul_sinr(self) -> np.ndarray:
        den = self.ul_iui + self.ul_qn_adc + self.ul_si + self.ul_noise
        return _ratio(self.ul_signal, den)


def _ratio(num, den):
    out = np.zeros_like(num)
    mask = num > 0
    out[mask] = num[mask] / den[mask]
    return out


def link_budget(ch: ChannelSet, w: np.ndarray, f: np.ndarray, setup: LinkSetup) -> LinkBudgetTerms:
    """Every signal, interference and noise power of the direct SE form."""
    if setup.half_duplex:
        ch = ch.half_duplex()
    a_dac, a_adc = setup.q_dac.alpha, setup.q_adc.alpha
    kappa_d = setup.kappa_d

    # downlink
    eff = ch.h_dl.conj().T @ (a_dac[:, None] * w)          # [k, i] = h_k^H Phi w_i
    pw = np.abs(eff) ** 2 * setup.p_dl
    dl_signal = np.real(np.diag(pw)).copy()
    dl_iui = pw.sum(axis=1) - dl_signal
    r_qdac = dac_noise_covariance(w, setup.p_dl, setup.q_dac)
    dl_qn = np.real(np.einsum("nk,n,nk->k", ch.h_dl.conj(), np.diag(r_qdac), ch.h_dl))
    dl_cci = np.sum(np.abs(ch.g_cci) ** 2, axis=0) * setup.p_ul
    dl_noise = np.full(ch.k_dl, setup.sigma2_dl)

    # uplink
    fa = a_adc[:, None] * f                                  # Phi_ADC^H f_k
    eff_u = fa.conj().T @ ch.h_ul                            # [k, i] = f_k^H Phi h_i
    pu = np.abs(eff_u) ** 2 * setup.p_ul
    ul_signal = np.real(np.diag(pu)).copy()
    ul_iui = pu.sum(axis=1) - ul_signal
    r_in = adc_input_covariance(ch, w, setup.p_dl, setup.p_ul, setup.sigma2_ul, setup.q_dac)
    r_qadc = np.real(np.diag(adc_noise_covariance(r_in, setup.q_adc)))
    ul_qn = np.sum(np.abs(f) ** 2 * r_qadc[:, None], axis=0)
    si_gain = fa.conj().T @ (ch.g_si * a_dac[None, :])       # f^H Phi G Phi_DAC
    ul_si = kappa_d * setup.p_dl * np.sum(np.abs(si_gain @ w) ** 2, axis=1)
    leak = fa.conj().T @ ch.g_si                             # f^H Phi G
    ul_si = ul_si + kappa_d * np.real(np.einsum("km,m,km->k", leak, np.diag(r_qdac), leak.conj()))
    ul_noise = np.sum(np.abs(fa) ** 2, axis=0) * setup.sigma2_ul
    return LinkBudgetTerms(dl_signal, dl_iui, dl_qn, dl_cci, dl_noise,
                           ul_signal, ul_iui, ul_qn, ul_si, ul_noise)


def downlink_se(ch: ChannelSet, w: np.ndarray, setup: LinkSetup, f: np.ndarray | None = None) -> np.ndarray:
    """Per-DL-user spectral efficiency (bit/s/Hz), direct form."""
    f = np.zeros((ch.n_rx, ch.k_ul), dtype=complex) if f is None else f
    return np.log2(1.0 + link_budget(ch, w, f, setup).dl_sinr)


def uplink_se(ch: ChannelSet, w: np.ndarray, f: np.ndarray, setup: LinkSetup) -> np.ndarray:
    """Per-UL-user spectral efficiency (bit/s/Hz), direct form."""
    return np.log2(1.0 + link_budget(ch, w, f, setup).ul_sinr)


def sum_se(ch: ChannelSet, w: np.ndarray, f: np.ndarray, setup: LinkSetup) -> float:
    """Total DL + UL sum SE; half-duplex time-shares the two directions."""
    terms = link_budget(ch, w, f, setup)
    dl = np.log2(1.0 + terms.dl_sinr).sum()
    ul = np.log2(1.0 + terms.ul_sinr).sum()
    if setup.half_duplex:
        return float((1.0 - setup.hd_lambda) * dl + setup.hd_lambda * ul)
    return float(dl + ul)


# -- reformulated (power-normalized) form ------------------------------------

def psi_si(ch: ChannelSet, f_k: np.ndarray, setup: LinkSetup) -> np.ndarray:
    """Attenuated-SI quadratic form seen by UL combiner ``f_k``."""
    a_dac, a_adc, b_dac = setup.q_dac.alpha, setup.q_adc.alpha, setup.q_dac.beta
    u = ch.g_si.conj().T @ (a_adc * f_k)                   # G^H Phi_ADC^H f_k
    ua = a_dac * u
    return np.outer(ua, ua.conj()) + np.diag(a_dac * b_dac * np.abs(u) ** 2)


def psi_qn(ch: ChannelSet, f_k: np.ndarray, setup: LinkSetup) -> np.ndarray:
    """ADC-quantization-noise quadratic form seen by UL combiner ``f_k``."""
    a_dac, b_dac = setup.q_dac.alpha, setup.q_dac.beta
    d = setup.q_adc.alpha * setup.q_adc.beta * np.abs(f_k) ** 2
    gdg = ch.g_si.conj().T @ (d[:, None] * ch.g_si)        # G^H Phi_a Phi_b diag(ff^H) G
    return (a_dac[:, None] * gdg * a_dac[None, :]) + np.diag(a_dac * b_dac * np.real(np.diag(gdg)))


def downlink_se_ref(ch: ChannelSet, w: np.ndarray, setup: LinkSetup) -> np.ndarray:
    """DL SE with all terms normalized by ``P_D``."""
    if setup.half_duplex:
        ch = ch.half_duplex()
    a, b = setup.q_dac.alpha, setup.q_dac.beta
    out = np.empty(ch.k_dl)
    for k in range(ch.k_dl):
        h = ch.h_dl[:, k]
        gains = np.abs(h.conj() @ (a[:, None] * w)) ** 2
        qn = sum(np.real(w[:, i].conj() @ (a * b * np.abs(h) ** 2 * w[:, i])) for i in range(w.shape[1]))
        const = np.linalg.norm(ch.g_cci[:, k]) ** 2 * setup.p_ul / setup.p_dl + setup.sigma2_dl / setup.p_dl
        den = gains.sum() - gains[k] + qn + const
        out[k] = math.log2(1.0 + gains[k] / den) if gains[k] > 0 else 0.0
    return out


def uplink_se_ref(ch: ChannelSet, w: np.ndarray, f: np.ndarray, setup: LinkSetup) -> np.ndarray:
    """UL SE with all terms normalized by ``P_U``."""
    if setup.half_duplex:
        ch = ch.half_duplex()
    a_adc, b_adc = setup.q_adc.alpha, setup.q_adc.beta
    ratio = setup.p_dl / setup.p_ul
    out = np.empty(ch.k_ul)
    for k in range(ch.k_ul):
        fk = f[:, k]
        gains = np.abs((a_adc * fk).conj() @ ch.h_ul) ** 2
        p_si, p_qn = psi_si(ch, fk, setup), psi_qn(ch, fk, setup)
        quad = lambda m: sum(np.real(w[:, i].conj() @ m @ w[:, i]) for i in range(w.shape[1]))  # noqa: E731
        qn_bar = (sum(np.real(ch.h_ul[:, i].conj() @ (a_adc * b_adc * np.abs(fk) ** 2 * ch.h_ul[:, i]))
                      for i in range(ch.k_ul))
                  + ratio * quad(p_qn)
                  + setup.sigma2_ul / setup.p_ul * np.real(fk.conj() @ (a_adc * b_adc * fk)))
        si_bar = setup.kappa_d * ratio * quad(p_si)
        noise = np.linalg.norm(a_adc * fk) ** 2 * setup.sigma2_ul / setup.p_ul
        den = gains.sum() - gains[k] + qn_bar + si_bar + noise
        out[k] = math.log2(1.0 + gains[k] / den) if gains[k] > 0 else 0.0
    return out
