import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fdquant.channel import (ci_path_loss, covariance_sqrt, dump_channels, group_centers, load_channels,
                             one_ring_covariance, sample_channels)
from fdquant.scenario import desk_defaults, linear_to_db, rng_stream


def test_path_loss_anchors():
    assert linear_to_db(ci_path_loss(1.0, 10.0, 2.8)) == pytest.approx(-52.44, abs=0.01)
    assert linear_to_db(ci_path_loss(15.0, 10.0, 2.8)) == pytest.approx(-85.37, abs=0.01)
    # doubling the distance costs 10 n log10(2)
    ratio = linear_to_db(ci_path_loss(20.0, 10.0, 2.8) / ci_path_loss(10.0, 10.0, 2.8))
    assert ratio == pytest.approx(-28 * math.log10(2), abs=1e-9)


def test_path_loss_domain():
    with pytest.raises(ValueError):
        ci_path_loss(0.5, 10.0, 2.8)


def test_shadowing_only_with_generator():
    a = ci_path_loss(np.full(2000, 15.0), 10.0, 2.8, shadow_sd_db=8.4, rng=np.random.default_rng(1))
    spread = np.std(linear_to_db(a))
    assert spread == pytest.approx(8.4, rel=0.05)
    assert ci_path_loss(15.0, 10.0, 2.8, shadow_sd_db=8.4) == ci_path_loss(15.0, 10.0, 2.8)


def _quad_entry(theta, delta, lag):
    re = integrate.quad(lambda p: math.cos(math.pi * lag * math.sin(p)), theta - delta, theta + delta,
                        epsabs=1e-13, epsrel=1e-13)[0]
    im = integrate.quad(lambda p: math.sin(math.pi * lag * math.sin(p)), theta - delta, theta + delta,
                        epsabs=1e-13, epsrel=1e-13)[0]
    return (re + 1j * im) / (2 * delta)


@pytest.mark.parametrize("theta,delta,n", [(math.radians(30), math.radians(10), 4),
                                           (math.radians(-55), math.radians(10), 16),
                                           (0.2, 1.2, 8)])
def test_one_ring_matches_adaptive_quadrature(theta, delta, n):
    cov = one_ring_covariance(theta, delta, n)
    for m in range(n):
        for p in range(n):
            assert abs(cov[m, p] - _quad_entry(theta, delta, m - p)) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.2, 1.2), st.floats(0.01, 1.0), st.integers(1, 20))
def test_one_ring_structure(theta, delta, n):
    cov = one_ring_covariance(theta, delta, n)
    np.testing.assert_allclose(np.diag(cov), 1.0, atol=1e-12)
    np.testing.assert_allclose(cov, cov.conj().T, atol=1e-12)
    assert np.trace(cov).real == pytest.approx(n)
    assert np.linalg.eigvalsh(cov).min() > -1e-9
    sq = covariance_sqrt(cov)
    np.testing.assert_allclose(sq @ sq.conj().T, cov, atol=1e-9)


def test_narrow_spread_tends_to_rank_one():
    cov = one_ring_covariance(0.0, 1e-6, 6)
    np.testing.assert_allclose(cov, np.ones((6, 6)), atol=1e-9)


def test_covariance_sqrt_rejects_indefinite():
    with pytest.raises(ValueError):
        covariance_sqrt(np.diag([1.0, -1.0]))


def test_group_geometry():
    cfg = desk_defaults(d_cci_m=20.0)
    c_dl, c_ul = group_centers(cfg)
    assert np.linalg.norm(c_dl) == pytest.approx(cfg.d_dl_m)
    assert np.linalg.norm(c_ul) == pytest.approx(cfg.d_ul_m)
    assert np.linalg.norm(c_dl - c_ul) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        group_centers(desk_defaults(d_cci_m=100.0))


def test_sample_shapes_and_duplex_modes():
    cfg = desk_defaults()
    ch = sample_channels(cfg, rng_stream(0, 0))
    assert ch.h_dl.shape == (8, 2) and ch.h_ul.shape == (8, 2)
    assert ch.g_si.shape == (8, 8) and ch.g_cci.shape == (2, 2)
    hd = sample_channels(cfg.replace(duplex_mode="HD"), rng_stream(0, 0))
    assert not np.any(hd.g_si) and not np.any(hd.g_cci) and hd.rho_cci == 0.0
    # the user channels are shared between the duplex modes
    np.testing.assert_array_equal(hd.h_dl, ch.h_dl)
    np.testing.assert_array_equal(hd.h_ul, ch.h_ul)


def test_si_channel_power_follows_analog_sic():
    cfg = desk_defaults(kappa_a_db=-50.0)
    rng = np.random.default_rng(3)
    p = np.mean([np.mean(np.abs(sample_channels(cfg, rng).g_si) ** 2) for _ in range(200)])
    assert p == pytest.approx(1e-5, rel=0.05)


def test_empirical_user_covariance():
    # normalized empirical covariance of one user matches its one-ring model
    theta, delta, n = 0.4, math.radians(10), 8
    cov = one_ring_covariance(theta, delta, n)
    sq = covariance_sqrt(cov)
    rng = np.random.default_rng(5)
    z = (rng.standard_normal((n, 100_000)) + 1j * rng.standard_normal((n, 100_000))) / math.sqrt(2)
    h = sq @ z
    emp = h @ h.conj().T / h.shape[1]
    assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) < 0.02


def test_cci_gain_decreases_with_distance():
    near = sample_channels(desk_defaults(d_cci_m=10.0), rng_stream(0, 0)).rho_cci
    far = sample_channels(desk_defaults(d_cci_m=25.0), rng_stream(0, 0)).rho_cci
    assert near > far > 0


def test_dump_load_round_trip(tmp_path):
    ch = sample_channels(desk_defaults(), rng_stream(4, 1))
    path = tmp_path / "ch.csv"
    dump_channels(ch, path)
    back = load_channels(path)
    for name in ("h_ul", "h_dl", "g_si", "g_cci", "rho_ul", "rho_dl"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ch, name))
    assert back.rho_cci == ch.rho_cci
