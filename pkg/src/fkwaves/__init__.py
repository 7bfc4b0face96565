"""Traveling waves for damped-inertial Frenkel-Kontorova lattices.

Solver suite for the monotone (u, Xi) reformulation of the accelerated
Frenkel-Kontorova chain and its generalizations: lattice simulation with
front tracking, direct advance-delay profile solves, rotation numbers of
helical states, and runnable counterparts of the structural theorems
(comparison, velocity/profile uniqueness, monotonicity).
"""

from .backend import BACKEND, HAS_NUMBA
from .model import (
    AssumptionReport,
    ModelDescriptor,
    ModelParams,
    Nonlinearity,
    ShiftStencil,
    alpha_star,
    check_assumptions,
    classical_fk,
    cubic_bistable,
    custom_tabulated,
    eval_F,
    eval_f,
    find_interior_zero,
    make_model,
    reflected_model,
    validate_extension,
)

__all__ = [
    "AssumptionReport",
    "BACKEND",
    "HAS_NUMBA",
    "ModelDescriptor",
    "ModelParams",
    "Nonlinearity",
    "ShiftStencil",
    "alpha_star",
    "check_assumptions",
    "classical_fk",
    "cubic_bistable",
    "custom_tabulated",
    "eval_F",
    "eval_f",
    "find_interior_zero",
    "make_model",
    "reflected_model",
    "validate_extension",
]

__version__ = "0.1.0"
