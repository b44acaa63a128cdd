import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdquant import beamforming as bf
from fdquant.channel import sample_channels
from fdquant.linkmodel import LinkSetup, link_budget, precoder_to_stacked, stacked_to_precoder, sum_se, uplink_se
from fdquant.quantization import Quantizer
from fdquant.scenario import desk_defaults, rng_stream

from conftest import crandn, random_instance


def _instance(seed, bits=4, **kw):
    rng = np.random.default_rng(seed)
    ch, setup = random_instance(rng, bits=bits, **kw)
    f = crandn(rng, ch.n_rx, ch.k_ul)
    v = crandn(rng, ch.n_tx * ch.k_dl)
    return ch, setup, f, v / np.linalg.norm(v)


def test_quadratic_form_matrices_structure():
    ch, setup, f, v = _instance(0)
    mats = bf.build_gpi_matrices(ch, f, setup)
    dim = ch.n_tx * ch.k_dl
    for k in range(ch.k_dl):
        a, b = mats.full_a(k), mats.full_b(k)
        np.testing.assert_allclose(a, a.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(b).min() > 0
        assert np.linalg.matrix_rank(a - b, tol=1e-10) == 1
        assert np.linalg.eigvalsh(a - b).min() > -1e-12
    for k in range(ch.k_ul):
        np.testing.assert_allclose(mats.full_c(k) - mats.full_d(k), mats.s[k] * np.eye(dim), atol=1e-14)
        assert np.linalg.eigvalsh(mats.full_d(k)).min() > 0
    qa, qb, qc, qd = mats.forms(v)
    np.testing.assert_allclose(qa, [np.vdot(v, mats.full_a(k) @ v).real for k in range(ch.k_dl)])
    np.testing.assert_allclose(qd, [np.vdot(v, mats.full_d(k) @ v).real for k in range(ch.k_ul)])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([1, 3, 5, 7, math.inf]), st.booleans())
def test_ratios_reproduce_sinr_and_sum_rate(seed, bits, hd):
    ch, setup, f, v = _instance(seed, bits=bits, half_duplex=hd)
    setup = replace(setup, hd_lambda=0.5)
    mats = bf.build_gpi_matrices(ch, f, setup)
    w = stacked_to_precoder(v, setup.q_dac)
    terms = link_budget(ch, w, f, setup)
    qa, qb, qc, qd = mats.forms(v)
    np.testing.assert_allclose(qa / qb, 1 + terms.dl_sinr, rtol=1e-10)
    np.testing.assert_allclose(qc / qd, 1 + terms.ul_sinr, rtol=1e-10)
    if not hd:
        assert bf.log2_lambda(v, mats) == pytest.approx(sum_se(ch, w, f, setup), abs=1e-9)
    assert bf.lambda_value(2.5j * v, mats) == pytest.approx(bf.lambda_value(v, mats), rel=1e-10)


def test_half_duplex_uplink_ratio_is_precoder_free():
    ch, setup, f, v = _instance(1, half_duplex=True)
    mats = bf.build_gpi_matrices(ch, f, setup)
    assert not np.any(mats.n)
    other = crandn(np.random.default_rng(9), v.size)
    _, _, qc1, qd1 = mats.forms(v)
    _, _, qc2, qd2 = mats.forms(other / np.linalg.norm(other))
    np.testing.assert_allclose(qc1 / qd1, qc2 / qd2, rtol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    ch, setup, f, v = _instance(seed)
    mats = bf.build_gpi_matrices(ch, f, setup)
    grad = bf.lambda_gradient(v, mats)
    h = 1e-6
    fd = np.empty(v.size, dtype=complex)
    for m in range(v.size):
        e = np.zeros(v.size)
        e[m] = h
        d_re = (bf.lambda_value(v + e, mats) - bf.lambda_value(v - e, mats)) / (2 * h)
        d_im = (bf.lambda_value(v + 1j * e, mats) - bf.lambda_value(v - 1j * e, mats)) / (2 * h)
        fd[m] = 0.5 * (d_re + 1j * d_im)
    assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) < 1e-5


def test_gradient_vanishes_along_the_iterate():
    # lambda is scale invariant, so the gradient is orthogonal to v in the real sense
    ch, setup, f, v = _instance(11)
    mats = bf.build_gpi_matrices(ch, f, setup)
    assert abs(np.real(np.vdot(v, bf.lambda_gradient(v, mats)))) < 1e-9 * np.linalg.norm(
        bf.lambda_gradient(v, mats))


def test_block_solver_matches_full_assembly():
    ch, setup, f, v = _instance(2)
    mats = bf.build_gpi_matrices(ch, f, setup)
    ops = bf.kkt_operators(v, mats)
    np.testing.assert_allclose(ops.full_a() @ v, ops.apply_a(v), atol=1e-12 * ops.lam)
    np.testing.assert_allclose(ops.full_b() @ v, ops.apply_b(v), atol=1e-12)
    x = crandn(np.random.default_rng(0), v.size)
    np.testing.assert_allclose(ops.solve_b(x), ops.solve_b_full(x), atol=1e-10)
    blk = bf.gpi_precoder(v, mats, eps_v=1e-8, n_max=50)
    full = bf.gpi_precoder(v, mats, eps_v=1e-8, n_max=50, full_assembly=True)
    assert blk.iterations == full.iterations
    assert np.linalg.norm(blk.v_bar - full.v_bar) <= 1e-10


def test_power_iteration_special_case():
    # with one DL user, no UL user and B = I, the update is a plain power
    # iteration and converges to the principal eigenvector of A
    rng = np.random.default_rng(4)
    n = 5
    u = crandn(rng, n)
    a = 0.5
    m = np.outer(u, u.conj()) + (1 - a) * np.eye(n)
    mats = bf.GpiMatrices(m=m[None], a_const=np.array([a]), u=u[None], n=np.zeros((0, n, n), complex),
                          phi=np.zeros(0), s=np.zeros(0))
    np.testing.assert_allclose(mats.full_b(0), np.eye(n), atol=1e-12)
    res = bf.gpi_precoder(crandn(rng, n), mats, eps_v=1e-12, n_max=500)
    vals, vecs = np.linalg.eigh(mats.full_a(0))
    assert abs(abs(np.vdot(vecs[:, -1], res.v_bar)) - 1) < 1e-10
    assert bf.lambda_value(res.v_bar, mats) == pytest.approx(vals[-1], rel=1e-10)


def test_single_user_converges_to_matched_filter():
    rng = np.random.default_rng(5)
    ch, _ = random_instance(rng, n_tx=4, k_dl=1, k_ul=1, half_duplex=True)
    setup = LinkSetup(1.0, 1.0, 0.1, 0.1, 0.0, Quantizer.from_bits(math.inf, 4), Quantizer.from_bits(math.inf, 4),
                      half_duplex=True)
    mats = bf.build_gpi_matrices(ch, bf.mrc_combiner(ch, setup), setup)
    res = bf.gpi_precoder(crandn(rng, 4), mats, eps_v=1e-12, n_max=200)
    h = ch.h_dl[:, 0] / np.linalg.norm(ch.h_dl[:, 0])
    angle = math.acos(min(1.0, abs(np.vdot(h, res.v_bar))))
    assert angle < 1e-4


def test_iteration_reaches_stationary_point():
    ch, setup, f, v = _instance(6, bits=5)
    mats = bf.build_gpi_matrices(ch, f, setup)
    res = bf.gpi_precoder(v, mats, eps_v=1e-10, n_max=3000)
    assert res.converged
    assert res.residual < 1e-6
    assert np.linalg.norm(res.v_bar) == pytest.approx(1.0)


def test_gpi_caps_iterations():
    ch, setup, f, v = _instance(7)
    res = bf.gpi_precoder(v, bf.build_gpi_matrices(ch, f, setup), eps_v=1e-300, n_max=4)
    assert res.iterations == 4 and not res.converged and len(res.trace) == 4


def test_multistart_never_worse_than_its_first_start():
    ch, setup, f, _ = _instance(8)
    mats = bf.build_gpi_matrices(ch, f, setup)
    inits = bf.multistart_inits(ch, setup, n_random=3, rng=np.random.default_rng(0))
    assert len(inits) == 2 + ch.k_dl * ch.n_tx + 3
    single = bf.gpi_precoder(inits[0], mats, 1e-6, 200)
    multi = bf.gpi_multistart(inits, mats, 1e-6, 200)
    assert multi.trace[-1] >= single.trace[-1] - 1e-12


def test_qmmse_reduces_to_channel_under_white_noise():
    rng = np.random.default_rng(9)
    ch, _ = random_instance(rng, n_tx=3, k_dl=1, k_ul=1, half_duplex=True)
    setup = LinkSetup(1.0, 2.0, 1.0, 1.0, 0.0, Quantizer.from_bits(math.inf, 3), Quantizer.from_bits(math.inf, 3),
                      half_duplex=True)
    f = bf.qmmse_combiner(ch, np.zeros((3, 1)), setup)
    np.testing.assert_allclose(f, ch.h_ul, atol=1e-12)


@pytest.mark.parametrize("bits", [2, 4, math.inf])
def test_qmmse_is_locally_optimal(bits):
    rng = np.random.default_rng(10)
    ch, setup = random_instance(rng, bits=bits)
    w = bf.qrzf_precoder(ch, setup)
    f = bf.qmmse_combiner(ch, w, setup)
    best = uplink_se(ch, w, f, setup)
    for _ in range(200):
        g = f + 0.05 * np.linalg.norm(f, axis=0) * crandn(rng, *f.shape)
        assert np.all(uplink_se(ch, w, g, setup) <= best + 1e-12)


def test_qrzf_limits():
    ch, setup, _, _ = _instance(12, bits=3)
    a = setup.q_dac.alpha
    for reg in (None, 0.0, 1e9):
        w = bf.qrzf_precoder(ch, setup, reg=reg)
        assert np.sum(a[:, None] * np.abs(w) ** 2) == pytest.approx(1.0)
    zf = bf.qrzf_precoder(ch, setup, reg=0.0)
    cross = ch.h_dl.conj().T @ (a[:, None] * zf)
    assert np.max(np.abs(cross - np.diag(np.diag(cross)))) < 1e-10
    mrt = bf.qrzf_precoder(ch, setup, reg=1e12)
    for k in range(ch.k_dl):
        target = a * ch.h_dl[:, k]
        cos = abs(np.vdot(target, mrt[:, k])) / (np.linalg.norm(target) * np.linalg.norm(mrt[:, k]))
        assert cos == pytest.approx(1.0, abs=1e-9)


@pytest.fixture(scope="module")
def desk_runs():
    cfg = desk_defaults()
    setup = LinkSetup.from_config(cfg)
    out = []
    for t in range(12):
        ch = sample_channels(cfg, rng_stream(cfg.seed, t))
        out.append((ch, bf.alternate(ch, setup, bf.SolverOptions.from_config(cfg))))
    return setup, out


def test_alternation_improves_on_its_start(desk_runs):
    setup, runs = desk_runs
    for ch, st_ in runs:
        assert st_.trace[-1] > st_.trace[0]
        assert st_.iters_outer == len(st_.iters_inner) == len(st_.trace) - 1
        assert st_.iters_outer <= 30 and max(st_.iters_inner) <= 30
        assert np.linalg.norm(st_.v_bar) == pytest.approx(1.0)
        assert st_.trace[-1] == pytest.approx(sum_se(ch, st_.w, st_.f, setup))


def test_alternation_mostly_monotone(desk_runs):
    _, runs = desk_runs
    steps = np.concatenate([np.diff(st_.trace) for _, st_ in runs])
    assert np.mean(steps >= -1e-9) >= 0.95


def test_alternation_beats_baseline(desk_runs):
    setup, runs = desk_runs
    wins = sum(st_.trace[-1] >= bf.qrzf_qmmse(ch, setup).trace[-1] for ch, st_ in runs)
    assert wins == len(runs)


def test_alternation_is_deterministic(desk_runs):
    setup, runs = desk_runs
    ch, first = runs[0]
    again = bf.alternate(ch, setup)
    np.testing.assert_array_equal(again.v_bar, first.v_bar)
    assert again.trace == first.trace


def test_half_duplex_alternation_is_a_single_precoder_problem():
    cfg = desk_defaults(duplex_mode="HD")
    ch = sample_channels(cfg, rng_stream(0, 3))
    setup = LinkSetup.from_config(cfg)
    opt = bf.SolverOptions(eps_v=1e-8, n_max=500)
    st_ = bf.alternate(ch, setup, opt)
    v0 = precoder_to_stacked(bf.qrzf_precoder(ch, setup), setup.q_dac)
    once = bf.gpi_precoder(v0, bf.build_gpi_matrices(ch, bf.mrc_combiner(ch, setup), setup), 1e-8, 500)
    assert abs(abs(np.vdot(once.v_bar, st_.v_bar)) - 1) < 1e-8
