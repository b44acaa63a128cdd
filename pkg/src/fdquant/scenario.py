"""
Experiment configuration, unit conversions and reproducible random streams.

Everything inside the solvers runs in linear units (W, dimensionless gains);
dB and dBm only appear in :class:`ScenarioConfig` fields and in reports.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

__all__ = [
    "ScenarioConfig",
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "linear_to_db",
    "thermal_noise_dbm",
    "load_paper_defaults",
    "desk_defaults",
    "rng_stream",
    "load_config_file",
    "env_overrides",
    "parse_bits",
]

NOISE_PSD_DBM_HZ = -174.0
ENV_PREFIX = "FDQ_"


def dbm_to_watts(x):
    """Convert dBm to watts."""
    if np.ndim(x):
        return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)
    return 10.0 ** ((float(x) - 30.0) / 10.0)


def watts_to_dbm(p):
    """Convert watts to dBm. Zero power maps to ``-inf``."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p) + 30.0


def db_to_linear(x):
    if np.ndim(x):
        return 10.0 ** (np.asarray(x, dtype=float) / 10.0)
    return 10.0 ** (float(x) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def thermal_noise_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Receiver noise power: -174 dBm/Hz + 10 log10(B) + NF."""
    return NOISE_PSD_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def parse_bits(value: Any, n: int | None = None) -> tuple[float, ...]:
    """Normalize a bit specification to a per-converter tuple.

    Accepts an int, ``inf``, the strings ``"7"``, ``"inf"``, ``"7,7,6,6"``
    or any sequence of those. A scalar is broadcast to ``n`` converters.
    """
    if isinstance(value, str):
        parts = [p.strip() for p in value.replace(";", ",").split(",") if p.strip()]
        value = [float(p) for p in parts]
        if len(value) == 1:
            value = value[0]
    if np.ndim(value) == 0:
        b = float(value)
        if n is None:
            return (b,)
        return (b,) * n
    bits = tuple(float(b) for b in value)
    if n is not None and len(bits) == 1:
        bits = bits * n
    return bits


@dataclass(frozen=True)
class ScenarioConfig:
    """Every physical and algorithmic parameter of one experiment.

    Powers are in dBm, SIC capabilities in dB and distances in metres.
    ``b_adc``/``b_dac`` may be given as a scalar (broadcast to every
    converter) or a per-antenna sequence; ``math.inf`` denotes an
    infinite-resolution converter.
    """

    n_tx: int = 16
    n_rx: int = 16
    k_dl: int = 4
    k_ul: int = 4
    p_dl_dbm: float = 24.0
    p_ul_dbm: float = 23.0
    b_adc: Any = 7
    b_dac: Any = 7
    kappa_a_db: float = -60.0
    kappa_d_mode: str = "calibrated"
    kappa_d_db: float = 0.0
    carrier_ghz: float = 10.0
    bandwidth_hz: float = 500e6
    noise_figure_db: float = 5.0
    pathloss_exponent: float = 2.8
    shadow_sd_db: float = 8.4
    shadowing: bool = False
    d_dl_m: float = 15.0
    d_ul_m: float = 15.0
    delta_d_m: float = 4.0
    d_cci_m: float = 30.0
    angular_spread_deg: float = 10.0
    angle_range_deg: float = 60.0
    duplex_mode: str = "FD"
    hd_lambda: float = 0.5
    eps_v: float = 1e-2
    eps_u: float = 1e-2
    eps_f: float = 1e-2
    n_max: int = 30
    t_max: int = 30
    qrzf_reg: float | None = None
    seed: int = 0

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("b_adc", parse_bits(self.b_adc, self.n_rx))
        set_("b_dac", parse_bits(self.b_dac, self.n_tx))
        set_("duplex_mode", str(self.duplex_mode).upper())
        set_("kappa_d_mode", str(self.kappa_d_mode).lower())
        self.validate()

    def validate(self) -> None:
        for name in ("n_tx", "n_rx", "k_dl", "k_ul", "n_max", "t_max"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("eps_v", "eps_u", "eps_f"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if len(self.b_adc) != self.n_rx:
            raise ValueError(f"b_adc has {len(self.b_adc)} entries for {self.n_rx} receive antennas")
        if len(self.b_dac) != self.n_tx:
            raise ValueError(f"b_dac has {len(self.b_dac)} entries for {self.n_tx} transmit antennas")
        if any(not b >= 1 for b in self.b_adc + self.b_dac):
            raise ValueError("converter bits must be >= 1 (or inf)")
        if self.kappa_a_db > 0:
            raise ValueError("kappa_a_db must be <= 0 dB")
        if self.duplex_mode not in ("FD", "HD"):
            raise ValueError(f"duplex_mode must be FD or HD, got {self.duplex_mode!r}")
        if self.kappa_d_mode not in ("calibrated", "explicit", "off"):
            raise ValueError(f"unknown kappa_d_mode {self.kappa_d_mode!r}")
        if not 0.0 <= self.hd_lambda <= 1.0:
            raise ValueError("hd_lambda must lie in [0, 1]")
        if self.delta_d_m < 0 or min(self.d_dl_m, self.d_ul_m) < 1.0:
            raise ValueError("group distances must be >= 1 m and radius >= 0")

    # -- derived linear quantities ---------------------------------------
    @property
    def is_fd(self) -> bool:
        return self.duplex_mode == "FD"

    @property
    def p_dl_w(self) -> float:
        return dbm_to_watts(self.p_dl_dbm)

    @property
    def p_ul_w(self) -> float:
        return dbm_to_watts(self.p_ul_dbm)

    @property
    def kappa_a(self) -> float:
        """Linear analog SIC capability; zero in half-duplex mode."""
        return db_to_linear(self.kappa_a_db) if self.is_fd else 0.0

    @property
    def noise_dbm(self) -> float:
        return thermal_noise_dbm(self.bandwidth_hz, self.noise_figure_db)

    @property
    def sigma2_ul(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def sigma2_dl(self) -> float:
        # one noise figure for both link directions
        return dbm_to_watts(self.noise_dbm)

    def with_bits(self, bits) -> "ScenarioConfig":
        """Same scenario with every ADC and DAC set to ``bits``."""
        return dataclasses.replace(self, b_adc=bits, b_dac=bits)

    def replace(self, **changes) -> "ScenarioConfig":
        # per-antenna bit tuples no longer match when antenna counts change
        for n_key, b_key in (("n_rx", "b_adc"), ("n_tx", "b_dac")):
            if n_key in changes and b_key not in changes:
                bits = getattr(self, b_key)
                if len(set(bits)) == 1:
                    changes[b_key] = bits[0]
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_paper_defaults() -> ScenarioConfig:
    """Full-scale reference scenario: 16 antennas, 4+4 users, 7-bit converters."""
    return ScenarioConfig()


def desk_defaults(**overrides) -> ScenarioConfig:
    """Reduced configuration (8 antennas, 2+2 users) for quick runs."""
    base = dict(n_tx=8, n_rx=8, k_dl=2, k_ul=2)
    base.update(overrides)
    return ScenarioConfig(**base)


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator for trial ``stream_id`` of a run seeded ``seed``.

    The pair is hashed by :class:`numpy.random.SeedSequence`, so streams for
    different trial indices are independent and can be drawn in any order.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream_id),))
    return np.random.default_rng(ss)


# -- config files and environment ---------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def _coerce(key: str, raw: str):
    raw = raw.strip().strip('"').strip("'")
    if key in ("b_adc", "b_dac"):
        return parse_bits(raw)
    typ = _FIELD_TYPES[key]
    if typ == "int":
        return int(float(raw))
    if typ == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {key} = {raw!r}")
    if typ == "str":
        return raw
    if raw.lower() in ("none", ""):
        return None
    return float(raw)


def _coerce_mapping(values: Mapping[str, str]) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in _FIELD_TYPES:
            raise KeyError(f"unknown configuration key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def _read_ini(path: str | Path) -> configparser.ConfigParser:
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    # flat files carry scenario keys before any section header
    parser.read_string("[scenario]\n" + text)
    return parser


def load_config_file(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a flat ``key = value`` file into a :class:`ScenarioConfig`.

    Keys match the dataclass field names; a ``[power]`` section, if
    present, is ignored here and read by :func:`fdquant.energy.load_power_model`.
    """
    parser = _read_ini(path)
    values = _coerce_mapping(dict(parser["scenario"]))
    base = base or ScenarioConfig()
    return base.replace(**values)


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """Collect ``FDQ_<FIELD>`` overrides from the environment."""
    environ = os.environ if environ is None else environ
    found = {}
    for key in _FIELD_TYPES:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            found[key] = environ[name]
    return _coerce_mapping(found)
