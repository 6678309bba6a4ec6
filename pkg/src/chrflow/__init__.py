"""Cahn-Hilliard reaction model: minimizing-movements solver with certified dissipation."""
from .config import ConfigError, RunConfig, parse_config, parse_text
from .diagnostics import certify, dissipation_certificate, gibbs_thomson_residual, perimeter_I0
from .duality import DualityContext, eval_A, eval_A_star, fenchel_gap, invert_B
from .materials import MaterialLaw, make_clipped_butler_volmer, make_law, make_quartic_affine, surface_tension, validate
from .mesh import FormSet, Mesh, SolverError, assemble_forms
from .sharp_interface import eps_continuation, msr_radial_evolve, planar_evolve, radial_state
from .stepper import (DissipationLedger, StepFailure, StepRecord, Tolerances, chemical_potential,
                      energy_I_eps, minmove_step, simulate, variational_interpolant)
from .workflow import run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DissipationLedger",
    "DualityContext",
    "FormSet",
    "MaterialLaw",
    "Mesh",
    "RunConfig",
    "SolverError",
    "StepFailure",
    "StepRecord",
    "Tolerances",
    "assemble_forms",
    "certify",
    "chemical_potential",
    "dissipation_certificate",
    "energy_I_eps",
    "eps_continuation",
    "eval_A",
    "eval_A_star",
    "fenchel_gap",
    "gibbs_thomson_residual",
    "invert_B",
    "make_clipped_butler_volmer",
    "make_law",
    "make_quartic_affine",
    "minmove_step",
    "msr_radial_evolve",
    "parse_config",
    "parse_text",
    "perimeter_I0",
    "planar_evolve",
    "radial_state",
    "run",
    "simulate",
    "surface_tension",
    "validate",
    "variational_interpolant",
]
