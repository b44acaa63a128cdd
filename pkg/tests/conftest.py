"""Shared fixtures: small random channel/precoder instances."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fdquant.channel import ChannelSet
from fdquant.linkmodel import LinkSetup
from fdquant.quantization import Quantizer
from fdquant.scenario import desk_defaults, rng_stream


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def random_instance(rng, n_tx=4, n_rx=None, k_dl=2, k_ul=2, bits=4, half_duplex=False,
                    kappa_d=None, sigma2=1e-2):
    """Unstructured channels with realistic relative magnitudes.

    User channels are unit-variance, SI is ``-30 dB`` per entry, CCI is
    ``-10 dB``, and powers are O(1), so all terms of the link budget
    contribute.
    """
    n_rx = n_tx if n_rx is None else n_rx
    g_si = 10 ** (-1.5) * crandn(rng, n_rx, n_tx)
    g_cci = 10 ** (-0.5) * crandn(rng, k_ul, k_dl)
    ch = ChannelSet(h_ul=crandn(rng, n_rx, k_ul), h_dl=crandn(rng, n_tx, k_dl), g_si=g_si,
                    g_cci=g_cci, rho_ul=np.ones(k_ul), rho_dl=np.ones(k_dl), rho_cci=0.1)
    if half_duplex:
        ch = ch.half_duplex()
    kd = float(rng.uniform(0.05, 1.0)) if kappa_d is None else kappa_d
    setup = LinkSetup(p_dl=float(rng.uniform(0.5, 2.0)), p_ul=float(rng.uniform(0.5, 2.0)),
                      sigma2_dl=sigma2, sigma2_ul=sigma2, kappa_d=0.0 if half_duplex else kd,
                      q_dac=Quantizer.from_bits(bits, n_tx), q_adc=Quantizer.from_bits(bits, n_rx),
                      half_duplex=half_duplex)
    return ch, setup


def unit_precoder(rng, n_tx, k_dl, q_dac):
    """Random precoder satisfying ``Tr(Phi W W^H) = 1``."""
    w = crandn(rng, n_tx, k_dl)
    return w / math.sqrt(float(np.sum(q_dac.alpha[:, None] * np.abs(w) ** 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_config():
    return desk_defaults()


@pytest.fixture
def desk_draw(desk_config):
    from fdquant.channel import sample_channels

    return sample_channels(desk_config, rng_stream(desk_config.seed, 0))
