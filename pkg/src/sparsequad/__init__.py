"""Sparse non-negative quadrature rules for parametrized integrals.

Trains reduced quadrature rules from evaluations of an integrand family:
assembles the linear training constraints, compresses them by truncated
SVD, and solves for sparse non-negative weights either by a calibrated
reweighted least-squares fixed point (quasi-norm minimization) or by a
linear-programming one-norm baseline. Includes a-priori error-bound
diagnostics and a comparison CLI.
"""
from ._threads import apply_thread_cap as _apply_thread_cap

_apply_thread_cap()

from .compression import CompressedSystem, compress, constraint_svd, select_rank
from .dataset import (
    ConstraintSystem,
    FullRule,
    FunctionFamily,
    TrainingSet,
    assemble_system,
    full_integrals,
)
from .diagnostics import (
    BoundInputs,
    ErrorReport,
    apriori_bound,
    empirical_error,
    fill_distance,
    sf_constant,
)
from .estimators import FocussQuadrature, LinearProgramQuadrature
from .families import monomial_family, schrodinger_family, schrodinger_integrand, trapezoid_rule
from .focuss import (
    FocussConfig,
    SolverError,
    SparseRule,
    calibrate_lambda,
    enforce_nonnegativity,
    extract_rule,
    regularized_step,
    residual_norm_for_lambda,
    solve,
)
from .lp import SimplexError, solve_l1

__version__ = "0.1.0"

__all__ = [
    "CompressedSystem",
    "compress",
    "constraint_svd",
    "select_rank",
    "ConstraintSystem",
    "FullRule",
    "FunctionFamily",
    "TrainingSet",
    "assemble_system",
    "full_integrals",
    "BoundInputs",
    "ErrorReport",
    "apriori_bound",
    "empirical_error",
    "fill_distance",
    "sf_constant",
    "FocussQuadrature",
    "LinearProgramQuadrature",
    "monomial_family",
    "schrodinger_family",
    "schrodinger_integrand",
    "trapezoid_rule",
    "FocussConfig",
    "SolverError",
    "SparseRule",
    "calibrate_lambda",
    "enforce_nonnegativity",
    "extract_rule",
    "regularized_step",
    "residual_norm_for_lambda",
    "solve",
    "SimplexError",
    "solve_l1",
]
