"""
fdquant: link-level simulation of full-duplex multi-user MIMO with
low-resolution DACs and ADCs.

Modules
-------
scenario      configuration, units, random streams
channel       path loss, one-ring correlation, channel sampling
quantization  additive quantization-noise model
adc_analysis  closed-form ADC bit budget of a single-antenna link
linkmodel     per-user spectral efficiencies
beamforming   GPI precoder, qMMSE combiner, alternation, qRZF
energy        circuit power and energy efficiency
harness       Monte-Carlo sweeps and output files
"""

from .scenario import ScenarioConfig, desk_defaults, load_paper_defaults, rng_stream
from .channel import ChannelSet, sample_channels
from .quantization import Quantizer, quant_distortion_beta
from .linkmodel import BeamformerState, LinkSetup, downlink_se, sum_se, uplink_se
from .beamforming import SolverOptions, alternate, gpi_precoder, qmmse_combiner, qrzf_precoder
from .energy import PowerModel, energy_efficiency, load_power_model, total_power
from .harness import SweepSpec, run_sweep, summarize

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "desk_defaults", "load_paper_defaults", "rng_stream",
    "ChannelSet", "sample_channels", "Quantizer", "quant_distortion_beta",
    "BeamformerState", "LinkSetup", "downlink_se", "uplink_se", "sum_se",
    "SolverOptions", "alternate", "gpi_precoder", "qmmse_combiner", "qrzf_precoder",
    "PowerModel", "energy_efficiency", "load_power_model", "total_power",
    "SweepSpec", "run_sweep", "summarize",
]
