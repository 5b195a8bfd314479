"""Desk-scale laboratory for gradient blowup in the 1D Euler equations.

Pipeline: admissible initial data -> evolution in fast-acoustic
characteristic coordinates up to the first gradient singularity ->
pre-shock location by a two-variable Newton solve on the extended flow ->
Eulerian cusp reconstruction and fractional-series verification.
"""

from .core import Field, FourierEval, Grid, Params, min_with_location, periodic_derivative
from .errors import PreshockError
from .initial_data import (InitialData, assemble, build_basis, build_wbar,
                           random_admissible, reduction_data)
from .manifold import ManifoldPoint, PipelineConfig, evaluate_pipeline, f_n, solve_lambda
from .singularity import BlowupReport, ExtendedFlow, build_report, extend, newton_G
from .solver import (LagrangianState, MonitorReport, initialize, monitor,
                     run_to_near_blowup, sensitivity_run, step)
from .cusp import CuspFit, EulerianProfile, eulerian_profile, fit_cusp, holder_exponent

__all__ = [
    "Field", "FourierEval", "Grid", "Params", "PreshockError",
    "min_with_location", "periodic_derivative",
    "InitialData", "assemble", "build_basis", "build_wbar",
    "random_admissible", "reduction_data",
    "ManifoldPoint", "PipelineConfig", "evaluate_pipeline", "f_n",
    "solve_lambda",
    "BlowupReport", "ExtendedFlow", "build_report", "extend", "newton_G",
    "LagrangianState", "MonitorReport", "initialize", "monitor",
    "run_to_near_blowup", "sensitivity_run", "step",
    "CuspFit", "EulerianProfile", "eulerian_profile", "fit_cusp",
    "holder_exponent",
]

__version__ = "0.1.0"
