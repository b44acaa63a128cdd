"""
Sum-SE precoder by generalized power iteration (GPI), quantization-aware
MMSE combining, their alternation, and the regularized-ZF baseline.

The precoder is represented by the stacked weighted vector
``v_bar = [v_1; ...; v_K]`` with ``v_k = diag(alpha_DAC)^(1/2) w_k`` and
``||v_bar|| = 1``. Every per-user SE is then the log of a ratio of two
quadratic forms in ``v_bar``, and the product of those ratios, ``lambda``,
satisfies ``log2(lambda) = sum SE``.

All the quadratic-form matrices share a block-diagonal layout (``K_D``
blocks of size ``N_t``), so nothing of size ``(N_t K_D)^2`` is ever built
unless explicitly requested through the ``full_*`` helpers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .channel import ChannelSet
from .linkmodel import (BeamformerState, LinkSetup, precoder_to_stacked, psi_qn, psi_si,
                        stacked_to_precoder, sum_se)
from .quantization import adc_input_covariance, adc_noise_covariance, dac_noise_covariance
from .scenario import ScenarioConfig

__all__ = [
    "GpiMatrices",
    "KktOperators",
    "SolverOptions",
    "build_gpi_matrices",
    "kkt_operators",
    "lambda_value",
    "lambda_gradient",
    "stationarity_residual",
    "gpi_precoder",
    "gpi_multistart",
    "multistart_inits",
    "GpiResult",
    "qmmse_combiner",
    "mrc_combiner",
    "qrzf_precoder",
    "alternate",
    "qrzf_qmmse",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    eps_v: float = 1e-2
    eps_u: float = 1e-2
    eps_f: float = 1e-2
    n_max: int = 30
    t_max: int = 30
    qrzf_reg: float | None = None

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "SolverOptions":
        return cls(config.eps_v, config.eps_u, config.eps_f, config.n_max, config.t_max, config.qrzf_reg)


@dataclass(frozen=True)
class GpiMatrices:
    """Compact form of the DL matrices ``A_k, B_k`` and UL matrices ``C_k, D_k``.

    Attributes
    ----------
    m : (K_D, N_t, N_t)
        Per-DL-user block ``M_k``; ``A_k = I (x) M_k + a_const[k] I``.
    a_const : (K_D,)
        CCI plus noise, normalized by ``P_D``.
    u : (K_D, N_t)
        ``diag(alpha)^(1/2) h_k``; ``B_k`` removes ``u_k u_k^H`` from block ``k``.
    n : (K_U, N_t, N_t)
        Per-UL-user block ``N_k``; ``C_k = I (x) N_k + phi[k] I``.
    phi : (K_U,)
        Precoder-independent UL term.
    s : (K_U,)
        Desired UL gain ``|f_k^H Phi h_k|^2``; ``D_k = C_k - s[k] I``.
    """

    m: np.ndarray
    a_const: np.ndarray
    u: np.ndarray
    n: np.ndarray
    phi: np.ndarray
    s: np.ndarray

    @property
    def n_tx(self) -> int:
        return self.m.shape[1]

    @property
    def k_dl(self) -> int:
        return self.m.shape[0]

    @property
    def k_ul(self) -> int:
        return self.n.shape[0]

    def _blocks(self, v_bar):
        return np.asarray(v_bar).reshape(self.k_dl, self.n_tx)

    def forms(self, v_bar: np.ndarray):
        """Quadratic forms ``v^H A_k v, v^H B_k v, v^H C_k v, v^H D_k v``."""
        vb = self._blocks(v_bar)
        nv2 = float(np.real(np.vdot(vb, vb)))
        # sum over blocks j of v_j^H M_k v_j
        qm = np.real(np.einsum("jn,knm,jm->k", vb.conj(), self.m, vb))
        qa = qm + self.a_const * nv2
        qb = qa - np.abs(np.einsum("kn,kn->k", self.u.conj(), vb)) ** 2
        qn = np.real(np.einsum("jn,knm,jm->k", vb.conj(), self.n, vb))
        qc = qn + self.phi * nv2
        qd = qc - self.s * nv2
        return qa, qb, qc, qd

    # dense matrices, for tests and the full-assembly solver path
    def full_a(self, k: int) -> np.ndarray:
        return np.kron(np.eye(self.k_dl), self.m[k]) + self.a_const[k] * np.eye(self.k_dl * self.n_tx)

    def full_b(self, k: int) -> np.ndarray:
        sel = np.zeros((self.k_dl, self.k_dl))
        sel[k, k] = 1.0
        return self.full_a(k) - np.kron(sel, np.outer(self.u[k], self.u[k].conj()))

    def full_c(self, k: int) -> np.ndarray:
        return np.kron(np.eye(self.k_dl), self.n[k]) + self.phi[k] * np.eye(self.k_dl * self.n_tx)

    def full_d(self, k: int) -> np.ndarray:
        return self.full_c(k) - self.s[k] * np.eye(self.k_dl * self.n_tx)


def build_gpi_matrices(ch: ChannelSet, f: np.ndarray, setup: LinkSetup) -> GpiMatrices:
    """Assemble the quadratic-form matrices for a fixed combiner ``f``."""
    if setup.half_duplex:
        ch = ch.half_duplex()
    a_dac, b_dac = setup.q_dac.alpha, setup.q_dac.beta
    a_adc, b_adc = setup.q_adc.alpha, setup.q_adc.beta
    if np.any(a_dac <= 0):
        raise ValueError("DAC loss factors must be positive")
    sq = np.sqrt(a_dac)

    u = (sq[:, None] * ch.h_dl).T                                   # (K_D, N_t)
    m = np.einsum("kn,km->knm", u, u.conj())
    m = m + np.einsum("nm,kn->knm", np.eye(ch.n_tx), b_dac[None, :] * np.abs(ch.h_dl.T) ** 2)
    a_const = (np.sum(np.abs(ch.g_cci) ** 2, axis=0) * setup.p_ul + setup.sigma2_dl) / setup.p_dl

    ratio = setup.p_dl / setup.p_ul
    inv_sq = 1.0 / sq
    n_mats = np.empty((ch.k_ul, ch.n_tx, ch.n_tx), dtype=complex)
    phi = np.empty(ch.k_ul)
    s = np.empty(ch.k_ul)
    gains = np.abs((a_adc[:, None] * f).conj().T @ ch.h_ul) ** 2     # [k, i]
    for k in range(ch.k_ul):
        fk = f[:, k]
        psi = psi_qn(ch, fk, setup) + setup.kappa_d * psi_si(ch, fk, setup)
        n_mats[k] = ratio * (inv_sq[:, None] * psi * inv_sq[None, :])
        d = a_adc * b_adc * np.abs(fk) ** 2
        phi[k] = (gains[k].sum()
                  + np.sum(d[:, None] * np.abs(ch.h_ul) ** 2)
                  + np.real(fk.conj() @ (a_adc * fk)) * setup.sigma2_ul / setup.p_ul)
        s[k] = gains[k, k]
    return GpiMatrices(m=m, a_const=a_const, u=u, n=n_mats, phi=phi, s=s)


def lambda_value(v_bar: np.ndarray, mats: GpiMatrices) -> float:
    """Product of the per-user SINR-plus-one ratios; invariant to scaling ``v_bar``."""
    return 2.0 ** log2_lambda(v_bar, mats)


def log2_lambda(v_bar: np.ndarray, mats: GpiMatrices) -> float:
    qa, qb, qc, qd = mats.forms(v_bar)
    if min(qb.min(initial=np.inf), qd.min(initial=np.inf)) <= 0:
        raise FloatingPointError("non-positive quadratic form in the GPI objective")
    return float(np.sum(np.log2(qa / qb)) + np.sum(np.log2(qc / qd)))


@dataclass(frozen=True)
class KktOperators:
    """``A_KKT`` and ``B_KKT`` at one point, in block form.

    Every diagonal block of ``A_KKT`` equals ``lam * a_block``; block ``j``
    of ``B_KKT`` is ``b_base - b_rank1[j] b_rank1[j]^H``. The numerator /
    denominator split puts all of ``lambda`` on ``A_KKT``.
    """

    a_block: np.ndarray
    b_base: np.ndarray
    b_rank1: np.ndarray
    lam: float

    @property
    def k_dl(self) -> int:
        return self.b_rank1.shape[0]

    def b_block(self, j: int) -> np.ndarray:
        return self.b_base - np.outer(self.b_rank1[j], self.b_rank1[j].conj())

    def apply_a(self, v_bar: np.ndarray) -> np.ndarray:
        vb = np.asarray(v_bar).reshape(self.k_dl, -1)
        return self.lam * (vb @ self.a_block.T).reshape(-1)

    def apply_b(self, v_bar: np.ndarray) -> np.ndarray:
        vb = np.asarray(v_bar).reshape(self.k_dl, -1)
        out = vb @ self.b_base.T - self.b_rank1 * np.einsum("jn,jn->j", self.b_rank1.conj(), vb)[:, None]
        return out.reshape(-1)

    def solve_b(self, x: np.ndarray) -> np.ndarray:
        """``B_KKT^{-1} x`` by one Cholesky factorization per block."""
        xb = np.asarray(x).reshape(self.k_dl, -1)
        out = np.empty_like(xb, dtype=complex)
        for j in range(self.k_dl):
            out[j] = sla.cho_solve(sla.cho_factor(self.b_block(j), lower=True), xb[j])
        return out.reshape(-1)

    def full_a(self) -> np.ndarray:
        return self.lam * np.kron(np.eye(self.k_dl), self.a_block)

    def full_b(self) -> np.ndarray:
        return sla.block_diag(*[self.b_block(j) for j in range(self.k_dl)])

    def solve_b_full(self, x: np.ndarray) -> np.ndarray:
        """Reference path: factor the assembled ``B_KKT`` as one matrix."""
        return sla.cho_solve(sla.cho_factor(self.full_b(), lower=True), x)


def kkt_operators(v_bar: np.ndarray, mats: GpiMatrices) -> KktOperators:
    qa, qb, qc, qd = mats.forms(v_bar)
    if min(qb.min(initial=np.inf), qd.min(initial=np.inf)) <= 0:
        raise FloatingPointError("non-positive quadratic form while building KKT operators")
    eye = np.eye(mats.n_tx)
    a_block = (np.einsum("k,knm->nm", 1.0 / qa, mats.m) + np.sum(mats.a_const / qa) * eye
               + np.einsum("k,knm->nm", 1.0 / qc, mats.n) + np.sum(mats.phi / qc) * eye)
    b_base = (np.einsum("k,knm->nm", 1.0 / qb, mats.m) + np.sum(mats.a_const / qb) * eye
              + np.einsum("k,knm->nm", 1.0 / qd, mats.n) + np.sum((mats.phi - mats.s) / qd) * eye)
    b_rank1 = mats.u / np.sqrt(qb)[:, None]
    lam = float(np.prod(qa / qb) * np.prod(qc / qd))
    return KktOperators(a_block=0.5 * (a_block + a_block.conj().T),
                        b_base=0.5 * (b_base + b_base.conj().T), b_rank1=b_rank1, lam=lam)


def lambda_gradient(v_bar: np.ndarray, mats: GpiMatrices) -> np.ndarray:
    """Wirtinger derivative of ``lambda`` with respect to ``conj(v_bar)``.

    For a real perturbation of the real (imaginary) part of entry ``m``,
    the derivative of ``lambda`` is twice the real (imaginary) part of entry
    ``m`` of the returned vector.
    """
    v_bar = np.asarray(v_bar, dtype=complex)
    ops = kkt_operators(v_bar, mats)
    return ops.apply_a(v_bar) - ops.lam * ops.apply_b(v_bar)


def stationarity_residual(v_bar: np.ndarray, mats: GpiMatrices) -> float:
    """``||B_KKT^{-1} A_KKT v - lambda v|| / (lambda ||v||)``.

    The division by ``lambda`` keeps the residual on the scale of a unit
    vector, since ``lambda`` grows exponentially with the sum SE.
    """
    v_bar = np.asarray(v_bar, dtype=complex)
    ops = kkt_operators(v_bar, mats)
    r = ops.solve_b(ops.apply_a(v_bar)) - ops.lam * v_bar
    return float(np.linalg.norm(r) / (ops.lam * np.linalg.norm(v_bar)))


def _fix_gauge(v: np.ndarray) -> np.ndarray:
    """Rotate so that the largest-magnitude entry is real and positive."""
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        return v
    return v * (np.abs(v[i]) / v[i])


def _align_phase(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rotate ``v`` by the global phase that brings it closest to ``ref``."""
    c = np.vdot(ref, v)
    return v if c == 0 else v * (np.abs(c) / c)


@dataclass
class GpiResult:
    v_bar: np.ndarray
    iterations: int
    converged: bool
    residual: float
    trace: list          # log2(lambda) after each iteration
    residuals: list


def gpi_precoder(init_v: np.ndarray, mats: GpiMatrices, eps_v: float = 1e-2, n_max: int = 30,
                 *, full_assembly: bool = False) -> GpiResult:
    """Power iteration ``v <- B_KKT(v)^{-1} A_KKT(v) v`` with normalization.

    Stops when consecutive unit iterates (gauge-fixed) are within ``eps_v``
    or after ``n_max`` updates. ``full_assembly`` solves with the assembled
    ``(N_t K_D)``-square matrix instead of block by block.
    """
    v = _fix_gauge(np.asarray(init_v, dtype=complex) / np.linalg.norm(init_v))
    trace, residuals = [], []
    converged = False
    n = 0
    while n < n_max:
        ops = kkt_operators(v, mats)
        rhs = ops.apply_a(v) / ops.lam   # lambda only rescales; dropping it avoids overflow
        new = ops.solve_b_full(rhs) if full_assembly else ops.solve_b(rhs)
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite GPI iterate at step {n + 1} (lambda={ops.lam:.3e})")
        new = _align_phase(new / np.linalg.norm(new), v)
        n += 1
        step = float(np.linalg.norm(new - v))
        v = new
        trace.append(log2_lambda(v, mats))
        residuals.append(step)
        if step <= eps_v:
            converged = True
            break
    return GpiResult(v_bar=v, iterations=n, converged=converged,
                     residual=stationarity_residual(v, mats), trace=trace, residuals=residuals)


def multistart_inits(ch: ChannelSet, setup: LinkSetup, n_random: int = 0,
                     rng: np.random.Generator | None = None, single_entry: bool = True) -> list:
    """Starting points for :func:`gpi_multistart`.

    qRZF and MRT, then (optionally) every single-user single-antenna
    vector, then ``n_random`` isotropic unit vectors. Zero blocks are
    preserved by the power iteration, so single-user starts explore the
    solutions that switch other DL users off.
    """
    q = setup.q_dac
    inits = [precoder_to_stacked(qrzf_precoder(ch, setup), q),
             precoder_to_stacked(qrzf_precoder(ch, setup, reg=1e12), q)]
    if single_entry:
        for k in range(ch.k_dl):
            for n in range(ch.n_tx):
                v = np.zeros((ch.k_dl, ch.n_tx), dtype=complex)
                v[k, n] = 1.0
                inits.append(v.reshape(-1))
    if n_random:
        rng = np.random.default_rng(0) if rng is None else rng
        size = (n_random, ch.k_dl * ch.n_tx)
        inits.extend(rng.standard_normal(size) + 1j * rng.standard_normal(size))
    return [v / np.linalg.norm(v) for v in inits]


def gpi_multistart(inits, mats: GpiMatrices, eps_v: float = 1e-2, n_max: int = 30) -> GpiResult:
    """Run :func:`gpi_precoder` from several starts and keep the largest ``lambda``."""
    best = None
    for v0 in inits:
        res = gpi_precoder(v0, mats, eps_v, n_max)
        if best is None or res.trace[-1] > best.trace[-1]:
            best = res
    return best


# -- combiners ---------------------------------------------------------------

def mrc_combiner(ch: ChannelSet, setup: LinkSetup) -> np.ndarray:
    """Matched filter to the ADC-attenuated UL channels."""
    return setup.q_adc.alpha[:, None] * ch.h_ul


def qmmse_combiner(ch: ChannelSet, w: np.ndarray, setup: LinkSetup) -> np.ndarray:
    """Quantization-aware MMSE combiner ``f_k = K_z^{-1} diag(alpha_ADC) h_k``.

    ``K_z`` is the covariance of everything at the ADC output except user
    ``k``'s own signal: other UL users, residual SI after digital SIC
    (signal and DAC-noise parts), ADC quantization noise and attenuated
    thermal noise.
    """
    if setup.half_duplex:
        ch = ch.half_duplex()
    a_adc = setup.q_adc.alpha
    hu = a_adc[:, None] * ch.h_ul
    g = a_adc[:, None] * ch.g_si
    si = g @ (setup.q_dac.alpha[:, None] * w)
    r_qdac = np.diag(dac_noise_covariance(w, setup.p_dl, setup.q_dac))
    r_in = adc_input_covariance(ch, w, setup.p_dl, setup.p_ul, setup.sigma2_ul, setup.q_dac)
    r_qadc = np.diag(adc_noise_covariance(r_in, setup.q_adc))
    base = (setup.p_ul * hu @ hu.conj().T
            + setup.kappa_d * setup.p_dl * si @ si.conj().T
            + setup.kappa_d * (g * r_qdac[None, :]) @ g.conj().T
            + np.diag(r_qadc + setup.sigma2_ul * a_adc**2))
    f = np.empty((ch.n_rx, ch.k_ul), dtype=complex)
    for k in range(ch.k_ul):
        kz = base - setup.p_ul * np.outer(hu[:, k], hu[:, k].conj())
        kz = 0.5 * (kz + kz.conj().T)
        try:
            f[:, k] = np.linalg.solve(kz, hu[:, k])
            ok = np.all(np.isfinite(f[:, k]))
        except np.linalg.LinAlgError:
            ok = False
        if not ok:
            reg = 1e-12 * np.real(np.trace(kz)) / ch.n_rx
            log.warning("singular K_z for UL user %d; adding %.3e I", k, reg)
            f[:, k] = np.linalg.solve(kz + reg * np.eye(ch.n_rx), hu[:, k])
    return f


# -- precoders ---------------------------------------------------------------

def qrzf_precoder(ch: ChannelSet, setup: LinkSetup, reg: float | None = None) -> np.ndarray:
    """Regularized ZF on the DAC-attenuated DL channel.

    ``W ~ Phi H (H^H Phi^2 H + xi I)^{-1}`` with ``xi = K_D sigma_D^2 / P_D``
    by default, scaled so that ``Tr(Phi W W^H) = 1``.
    """
    a = setup.q_dac.alpha
    xi = ch.k_dl * setup.sigma2_dl / setup.p_dl if reg is None else float(reg)
    heff = a[:, None] * ch.h_dl
    gram = heff.conj().T @ heff + xi * np.eye(ch.k_dl)
    w = heff @ np.linalg.inv(gram).conj().T if xi == 0 else heff @ np.linalg.solve(gram, np.eye(ch.k_dl))
    return w / math.sqrt(float(np.sum(a[:, None] * np.abs(w) ** 2)))


def _stack_f(f: np.ndarray) -> np.ndarray:
    return f.T.reshape(-1)


def alternate(ch: ChannelSet, setup: LinkSetup, options: SolverOptions | None = None,
              *, init_w: np.ndarray | None = None, warm_start: bool = True) -> BeamformerState:
    """Alternate GPI precoding (combiner fixed) and qMMSE combining (precoder fixed).

    The precoder starts from qRZF and the combiner from MRC. Each GPI run is
    warm-started from the previous precoder. The loop ends once both the
    precoder change ``||u_t - u_{t-1}||`` and the relative combiner change
    are within tolerance, or after ``t_max`` outer iterations.
    """
    opt = options or SolverOptions()
    w0 = qrzf_precoder(ch, setup, opt.qrzf_reg) if init_w is None else init_w
    u = _fix_gauge(precoder_to_stacked(w0, setup.q_dac))
    u = u / np.linalg.norm(u)
    v_init = u
    f = mrc_combiner(ch, setup)
    state = BeamformerState.from_stacked(u, f, setup.q_dac)
    state.trace.append(sum_se(ch, state.w, f, setup))

    for t in range(1, opt.t_max + 1):
        mats = build_gpi_matrices(ch, f, setup)
        res = gpi_precoder(u if warm_start else v_init, mats, opt.eps_v, opt.n_max)
        res.v_bar = _align_phase(res.v_bar, u)
        w = stacked_to_precoder(res.v_bar, setup.q_dac)
        f_new = qmmse_combiner(ch, w, setup)
        du = float(np.linalg.norm(res.v_bar - u))
        nf = np.linalg.norm(f_new)
        df = float(np.linalg.norm(_stack_f(f_new) - _stack_f(f)) / nf) if nf > 0 else 0.0
        u, f = res.v_bar, f_new
        state.iters_inner.append(res.iterations)
        state.inner_trace.extend((t, n + 1, obj, r) for n, (obj, r) in enumerate(zip(res.trace, res.residuals)))
        state.trace.append(sum_se(ch, w, f, setup))
        state.iters_outer = t
        state.residual = res.residual
        log.debug("outer %d: sum SE %.4f, du=%.2e, df=%.2e, inner=%d",
                  t, state.trace[-1], du, df, res.iterations)
        if du <= opt.eps_u and df <= opt.eps_f:
            break

    state.v_bar = u
    state.w = stacked_to_precoder(u, setup.q_dac)
    state.f = f
    return state


def qrzf_qmmse(ch: ChannelSet, setup: LinkSetup, options: SolverOptions | None = None) -> BeamformerState:
    """Baseline: qRZF precoder followed by one qMMSE combiner."""
    opt = options or SolverOptions()
    w = qrzf_precoder(ch, setup, opt.qrzf_reg)
    f = qmmse_combiner(ch, w, setup)
    state = BeamformerState.from_stacked(precoder_to_stacked(w, setup.q_dac), f, setup.q_dac)
    state.trace.append(sum_se(ch, state.w, f, setup))
    return state
