"""Damped variational wave system for nematic liquid crystal directors in 1-D.

Modules: :mod:`model` (parameters, wave speed), :mod:`planar` (characteristic
solver and blowup data), :mod:`energycoords` (energy-dependent coordinates),
:mod:`reconstruct` (back to physical time slices), :mod:`refsolver`
(finite-difference reference) and :mod:`cli`.
"""

__version__ = "0.1.0"

from .energycoords import (BoundaryCurve, DirectorInitialData, EnergyGrid, SolverError,
                           forward_transform, growth_constant, invariant_residuals, lattice_rhs, rhs_2_19,
                           smooth_director_data, solve_region)
from .model import (ConfigError, MaterialParams, SolverConfig, load_config, speed_bounds,
                    wave_speed, wave_speed_planar)
from .planar import (BlowupProfileSpec, BlowupReport, GradientBlowup, PlanarState,
                     blowup_initial_data, blowup_time_bound, detect_blowup, evolve_planar,
                     run_planar)
from .reconstruct import (TimeSlice, dissipation_residual, extract_time_slice, hoelder_fit,
                          integrate_coordinates, l2_distance, slice_energy)
from .refsolver import FDState, compare_runs, fd_solve_director, fd_solve_planar

__all__ = [
    "BlowupProfileSpec", "BlowupReport", "BoundaryCurve", "ConfigError", "DirectorInitialData",
    "EnergyGrid", "FDState", "GradientBlowup", "MaterialParams", "PlanarState", "SolverConfig",
    "SolverError", "TimeSlice", "blowup_initial_data", "blowup_time_bound", "compare_runs",
    "detect_blowup", "dissipation_residual", "evolve_planar", "extract_time_slice",
    "fd_solve_director", "fd_solve_planar", "forward_transform", "growth_constant",
    "hoelder_fit", "integrate_coordinates", "invariant_residuals", "l2_distance", "load_config",
    "lattice_rhs", "rhs_2_19", "run_planar", "slice_energy", "smooth_director_data", "solve_region",
    "speed_bounds", "wave_speed", "wave_speed_planar",
]
