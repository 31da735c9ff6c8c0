"""Simulation and analysis of optomechanical optical wavelength conversion."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    CouplingParams,
    MechanicalModeParams,
    ModeState,
    OpticalModeParams,
    PowerCalibration,
    SystemParams,
    cooperativity,
    coupling_from_cooperativity,
    mechanical_intensity_ss,
    optimal_c1,
    steady_state_amplitudes,
    steady_state_efficiency,
)
