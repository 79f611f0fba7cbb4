"""Energy-efficient resource allocation for an IRS-assisted multi-user uplink.

User powers are optimized jointly with the beamforming at both ends of the
link (MMSE receivers at the base station, phase shifts at the IRS) by
block-coordinate ascent on the network energy efficiency in bit/J.
"""
from .bcd import BcdSettings, OptimizerMode, initialize, optimize
from .channel_gen import ChannelParams, generate_realization, load_channels, save_channels
from .core_model import ChannelSet, SolutionState, SystemConfig, compute_ee, compute_sinr
from .experiments import ExperimentSpec, ResultTable, emit_csv, load_spec, run_experiment

__version__ = "0.1.0"

__all__ = [
    "BcdSettings",
    "ChannelParams",
    "ChannelSet",
    "ExperimentSpec",
    "OptimizerMode",
    "ResultTable",
    "SolutionState",
    "SystemConfig",
    "compute_ee",
    "compute_sinr",
    "emit_csv",
    "generate_realization",
    "initialize",
    "load_channels",
    "load_spec",
    "optimize",
    "run_experiment",
    "save_channels",
]
