"""Channels and the linear quantization model.

The simulator draws spatially correlated user channels (one-ring model on a
half-wavelength array), an i.i.d. self-interference channel scaled by the
analog cancellation depth, and a scalar co-channel link between each UL and
DL user. Converters are modelled as a gain alpha plus uncorrelated noise;
here we check that model against an actual Lloyd-Max quantizer.

Run:  python demos/02_channels_and_quantization.py
"""

import math

import numpy as np

from fdquant.channel import one_ring_covariance, sample_channels
from fdquant.quantization import Quantizer, dac_noise_covariance, lloyd_max_quantize
from fdquant.scenario import desk_defaults, linear_to_db, rng_stream

print(__doc__.split("Run:")[0])

cfg = desk_defaults()
ch = sample_channels(cfg, rng_stream(cfg.seed, 0))
print(f"Scenario: {cfg.n_tx} AP antennas, {cfg.k_dl} DL + {cfg.k_ul} UL users")
print(f"  DL path gains  : {np.round(linear_to_db(ch.rho_dl), 1)} dB")
print(f"  UL path gains  : {np.round(linear_to_db(ch.rho_ul), 1)} dB")
print(f"  SI per entry   : {linear_to_db(np.mean(np.abs(ch.g_si) ** 2)):.1f} dB (analog SIC {cfg.kappa_a_db:.0f} dB)")
print(f"  CCI path gain  : {linear_to_db(ch.rho_cci):.1f} dB for groups {cfg.d_cci_m:.0f} m apart\n")

cov = one_ring_covariance(math.radians(20), math.radians(10), 8)
eig = np.sort(np.linalg.eigvalsh(cov))[::-1]
print("A 10-degree scattering ring makes the channel low-rank:")
print(f"  eigenvalues of the 8x8 covariance: {np.round(eig, 3)}\n")

print("Quantization model versus a real quantizer (3 bits, 200k symbols):")
rng = np.random.default_rng(0)
q = Quantizer.from_bits(3, 4)
w = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) / 2
s = (rng.standard_normal((2, 200_000)) + 1j * rng.standard_normal((2, 200_000))) / math.sqrt(2)
x = w @ s
power = np.sum(np.abs(w) ** 2, axis=1)
err = lloyd_max_quantize(x, 3, power[:, None]) - q.alpha[:, None] * x
print(f"  alpha = {q.alpha[0]:.5f}, beta = {q.beta[0]:.5f}")
print(f"  model noise power    : {np.round(np.diag(dac_noise_covariance(w, 1.0, q)).real, 4)}")
print(f"  measured noise power : {np.round(np.mean(np.abs(err) ** 2, axis=1), 4)}")
print(f"  |corr(noise, input)| : {np.max(np.abs(np.mean(err * x.conj(), axis=1))):.1e}")
