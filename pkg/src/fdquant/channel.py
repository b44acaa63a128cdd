"""
Channel generation: close-in path loss, one-ring spatial correlation for a
half-wavelength ULA, Rayleigh self-interference and co-channel interference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .scenario import ScenarioConfig

__all__ = [
    "ChannelSet",
    "ci_path_loss",
    "one_ring_covariance",
    "covariance_sqrt",
    "group_centers",
    "sample_channels",
    "dump_channels",
    "load_channels",
]

SPEED_OF_LIGHT = 299_792_458.0


def ci_path_loss(distance_m, carrier_ghz: float, exponent: float,
                 shadow_sd_db: float = 0.0, rng: np.random.Generator | None = None):
    """Close-in (1 m reference) path loss as a linear gain.

    ``PL = 20 log10(4 pi f / c) + 10 n log10(d) [+ X_sigma]``; shadowing is
    added only when ``rng`` is supplied.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("close-in model is defined for distances >= 1 m")
    fspl = 20.0 * math.log10(4.0 * math.pi * carrier_ghz * 1e9 / SPEED_OF_LIGHT)
    pl_db = fspl + 10.0 * exponent * np.log10(d)
    if rng is not None and shadow_sd_db > 0:
        pl_db = pl_db + rng.normal(0.0, shadow_sd_db, size=d.shape)
    gain = 10.0 ** (-pl_db / 10.0)
    return float(gain) if gain.ndim == 0 else gain


@lru_cache(maxsize=64)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def one_ring_covariance(center_angle_rad: float, angular_spread_rad: float, n_ant: int) -> np.ndarray:
    """Spatial covariance of the one-ring model for a half-wavelength ULA.

    ``C[m, p] = 1/(2D) * int_{t-D}^{t+D} exp(j pi (m - p) sin(phi)) dphi``
    evaluated with Gauss-Legendre quadrature. The result is Hermitian
    Toeplitz with unit diagonal.
    """
    if not angular_spread_rad > 0:
        raise ValueError("angular spread must be positive")
    lags = np.arange(n_ant)
    # enough nodes to resolve the fastest oscillation across the arc
    n_nodes = int(32 + 2 * n_ant * max(1.0, angular_spread_rad))
    x, wts = _gauss_legendre(n_nodes)
    phi = center_angle_rad + angular_spread_rad * x
    vals = np.exp(1j * np.pi * np.outer(lags, np.sin(phi))) @ wts / 2.0
    vals[0] = 1.0
    col = vals
    idx = np.arange(n_ant)[:, None] - np.arange(n_ant)[None, :]
    cov = np.where(idx >= 0, col[np.abs(idx)], np.conj(col[np.abs(idx)]))
    return cov


def covariance_sqrt(cov: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Factor ``L`` with ``L @ L^H = cov``, clamping small negative eigenvalues."""
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.conj().T))
    if vals.min() < -tol * max(1.0, vals.max()):
        raise ValueError(f"covariance is not PSD (min eigenvalue {vals.min():.3e})")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))[None, :]


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization.

    Attributes
    ----------
    h_ul : (N_r, K_U) complex
    h_dl : (N_t, K_D) complex
    g_si : (N_r, N_t) complex
    g_cci : (K_U, K_D) complex
    rho_ul, rho_dl : per-user linear path gains
    rho_cci : linear CCI path gain (shared by all DL users)
    """

    h_ul: np.ndarray
    h_dl: np.ndarray
    g_si: np.ndarray
    g_cci: np.ndarray
    rho_ul: np.ndarray
    rho_dl: np.ndarray
    rho_cci: float

    @property
    def n_tx(self) -> int:
        return self.h_dl.shape[0]

    @property
    def n_rx(self) -> int:
        return self.h_ul.shape[0]

    @property
    def k_dl(self) -> int:
        return self.h_dl.shape[1]

    @property
    def k_ul(self) -> int:
        return self.h_ul.shape[1]

    def half_duplex(self) -> "ChannelSet":
        """Same user channels with SI and CCI removed."""
        return replace(self, g_si=np.zeros_like(self.g_si),
                       g_cci=np.zeros_like(self.g_cci), rho_cci=0.0)


def _crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def group_centers(config: ScenarioConfig):
    """Positions (x, y) of the DL and UL group centres, AP at the origin.

    The angle between the two groups is chosen so that the centres are
    ``d_cci_m`` apart.
    """
    d_d, d_u, d_c = config.d_dl_m, config.d_ul_m, config.d_cci_m
    cos_t = (d_d**2 + d_u**2 - d_c**2) / (2.0 * d_d * d_u)
    if abs(cos_t) > 1.0 + 1e-12:
        raise ValueError(f"no geometry places the groups {d_c} m apart at {d_d} m / {d_u} m")
    theta = math.acos(min(1.0, max(-1.0, cos_t)))
    return np.array([d_d, 0.0]), np.array([d_u * math.cos(theta), d_u * math.sin(theta)])


def _drop_users(rng, center, radius, k):
    r = radius * np.sqrt(rng.random(k))
    ang = rng.uniform(0.0, 2.0 * math.pi, k)
    pos = center[None, :] + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    return np.maximum(np.linalg.norm(pos, axis=1), 1.0)


def _user_channels(rng, config, n_ant, dist):
    spread = math.radians(config.angular_spread_deg)
    span = math.radians(config.angle_range_deg)
    k = dist.size
    angles = rng.uniform(-span, span, k)
    fading = _crandn(rng, n_ant, k)
    shadow_rng = rng if config.shadowing else None
    rho = np.atleast_1d(ci_path_loss(dist, config.carrier_ghz, config.pathloss_exponent,
                                     config.shadow_sd_db, shadow_rng))
    h = np.empty((n_ant, k), dtype=complex)
    for i in range(k):
        sq = covariance_sqrt(one_ring_covariance(angles[i], spread, n_ant))
        h[:, i] = math.sqrt(rho[i]) * (sq @ fading[:, i])
    return h, rho


def sample_channels(config: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one channel realization for ``config``.

    The sequence of random draws does not depend on the duplex mode, so an
    FD and an HD configuration fed the same stream share their user
    channels; in HD mode SI and CCI are zero.
    """
    c_dl, c_ul = group_centers(config)
    dist_dl = _drop_users(rng, c_dl, config.delta_d_m, config.k_dl)
    dist_ul = _drop_users(rng, c_ul, config.delta_d_m, config.k_ul)
    h_dl, rho_dl = _user_channels(rng, config, config.n_tx, dist_dl)
    h_ul, rho_ul = _user_channels(rng, config, config.n_rx, dist_ul)

    g_si = math.sqrt(config.kappa_a) * _crandn(rng, config.n_rx, config.n_tx)
    rho_cci = ci_path_loss(max(config.d_cci_m, 1.0), config.carrier_ghz, config.pathloss_exponent)
    g_tilde = _crandn(rng, config.k_ul, config.k_dl)
    if not config.is_fd:
        rho_cci = 0.0
    g_cci = math.sqrt(rho_cci) * g_tilde
    return ChannelSet(h_ul=h_ul, h_dl=h_dl, g_si=g_si, g_cci=g_cci,
                      rho_ul=rho_ul, rho_dl=rho_dl, rho_cci=float(rho_cci))


# -- channel dump files ------------------------------------------------------

_MATRICES = ("h_ul", "h_dl", "g_si", "g_cci")


def dump_channels(ch: ChannelSet, path) -> None:
    """Write a channel set as CSV.

    One row per matrix entry in column-major order:
    ``name,row,col,re,im``; path gains follow as ``rho_*`` rows with the
    value in ``re``.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["name", "row", "col", "re", "im"])
        for name in _MATRICES:
            mat = getattr(ch, name)
            for j in range(mat.shape[1]):
                for i in range(mat.shape[0]):
                    z = mat[i, j]
                    wr.writerow([name, i, j, repr(float(z.real)), repr(float(z.imag))])
        for name in ("rho_ul", "rho_dl"):
            for i, val in enumerate(getattr(ch, name)):
                wr.writerow([name, i, 0, repr(float(val)), "0.0"])
        wr.writerow(["rho_cci", 0, 0, repr(float(ch.rho_cci)), "0.0"])


def load_channels(path) -> ChannelSet:
    """Inverse of :func:`dump_channels`."""
    entries: dict[str, dict] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            entries.setdefault(row["name"], {})[(int(row["row"]), int(row["col"]))] = (
                complex(float(row["re"]), float(row["im"])))

    def build(name):
        cells = entries.get(name, {})
        if not cells:
            raise ValueError(f"channel file lacks {name}")
        shape = (max(i for i, _ in cells) + 1, max(j for _, j in cells) + 1)
        mat = np.zeros(shape, dtype=complex)
        for (i, j), z in cells.items():
            mat[i, j] = z
        return mat

    mats = {name: build(name) for name in _MATRICES}
    return ChannelSet(**mats,
                      rho_ul=build("rho_ul")[:, 0].real.copy(),
                      rho_dl=build("rho_dl")[:, 0].real.copy(),
                      rho_cci=float(build("rho_cci")[0, 0].real))
