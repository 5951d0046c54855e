"""Pseudospectral simulator for stochastic nematic liquid-crystal flow on the 3-torus,
with energy, regularity and noise diagnostics."""

from .config import ConfigError, RunConfig, load_config
from .noise import NoiseModel
from .snapshot import Snapshot, read_snapshot, write_snapshot
from .solver import InstabilityError, SimState, make_state, step
from .spectral import MollifierSpec, SpectralField, TorusGrid

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InstabilityError",
    "MollifierSpec",
    "NoiseModel",
    "RunConfig",
    "SimState",
    "Snapshot",
    "SpectralField",
    "TorusGrid",
    "load_config",
    "make_state",
    "read_snapshot",
    "step",
    "write_snapshot",
]
