"""Guided-mode environment of an optical nanofiber and the non-Markovian
dynamics of one and two two-level atoms coupled to it."""

from .analysis import (AnalysisReport, collective_rates_from_integrals,
                       communication_time, establishment_time,
                       fit_decay_rate, gamma_integrals)
from .bath import (CorrelationFunction, SpectralGrid, choose_cutoff,
                   correlation_function, markovian_rate,
                   one_point_spectral_density, two_point_integrand)
from .dynamics import (EvolutionResult, InitialState, convergence_check,
                       evolve, evolve_single, markov_reference_evolution)
from .pipeline import CaseContext, RunConfig, build_context, run_case
from .waveguide import (DielectricModel, DispersionTable, FiberGeometry,
                        ModeProfile, build_dispersion_table,
                        calibrate_plasma_frequency, dispersion_residual,
                        mode_s_parameter, solve_beta)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "CaseContext", "CorrelationFunction",
    "DielectricModel", "DispersionTable", "EvolutionResult",
    "FiberGeometry", "InitialState", "ModeProfile", "RunConfig",
    "SpectralGrid", "build_context", "build_dispersion_table",
    "calibrate_plasma_frequency", "choose_cutoff",
    "collective_rates_from_integrals", "communication_time",
    "convergence_check", "correlation_function", "dispersion_residual",
    "establishment_time", "evolve", "evolve_single", "fit_decay_rate",
    "gamma_integrals", "markov_reference_evolution", "markovian_rate",
    "mode_s_parameter", "one_point_spectral_density", "run_case",
    "solve_beta", "two_point_integrand",
]
