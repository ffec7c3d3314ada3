"""Spectral Galerkin tools for Kelvin-Voigt viscoelasticity with nonconvex
stored energies: constitutive models and hypothesis checks, torus transforms,
the potential-based solver, energy/modulated-energy diagnostics, exact
oscillatory solutions, and the capillarity-to-parabolic reduction."""

from .spectral import (BlowUpError, Grid, SpectralField, divergence, forward,
                       gradient, inverse, laplacian, l2_norm, sobolev_norm)
from .stored_energy import (PiecewiseStress1D, StoredEnergyModel,
                            build_nonmonotone_stress, builtin_models,
                            make_model)
from .solver import KVState, SolverConfig, RunResult, run
from .diagnostics import (DiagnosticSeries, dissipation, energy,
                          energy_balance_residual, modulated_energy,
                          modulated_inequality_residual)
from .exact_solutions import (DispersionRoots, OscillationFamily,
                              build_oscillation_family, dispersion_roots,
                              measure_linear_decay, verify_rankine_hugoniot,
                              weak_limits)
from .diffusion_dispersion import (DDConfig, equivalence_check, kappa_from,
                                   solve_difdis, solve_difdisred,
                                   transform_velocity)
from .mms import ManufacturedSolution, default_profile

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
