"""Coupled-dipole simulation of fluorescence from cold, moving atoms."""
from __future__ import annotations

__version__ = "0.1.0"

from ._backend import BACKEND
from .core import AtomSet, EnsembleConfig, Pulse, sample_atoms
from .coupling import CouplingMatrix, DegeneratePairError, DriveVector, assemble, drive_vector
from .dimer import DimerMode, FlybyScenario, dimer_modes, flyby, mode_populations
from .dynamics import AmplitudeState, DivergenceError, IntegrationPlan, integrate, rhs
from .observables import ObservableSeries, Spectrum, far_field_amplitude, stft_spectrum, total_intensity
from .theory import TheoryInputs, diffusion_time, fit_plateau, optical_thickness, slab_initial_rate

__all__ = [
    "BACKEND", "AtomSet", "EnsembleConfig", "Pulse", "sample_atoms", "CouplingMatrix", "DegeneratePairError",
    "DriveVector", "assemble", "drive_vector", "DimerMode", "FlybyScenario", "dimer_modes", "flyby",
    "mode_populations", "AmplitudeState", "DivergenceError", "IntegrationPlan", "integrate", "rhs",
    "ObservableSeries", "Spectrum", "far_field_amplitude", "stft_spectrum", "total_intensity", "TheoryInputs",
    "diffusion_time", "fit_plateau", "optical_thickness", "slab_initial_rate",
]
