"""Certified bounds on the n-queens constant from two entropy programs.

The lower bound is a Lagrange dual value of a separable entropy program; the
upper bound is the objective of a pair-integral entropy program at a feasible
point.  Both programs are solved with an infeasible-start Newton method whose
reduced linear systems are handled by matrix-free MINRES.
"""

from .certify import BoundCertificate, certify_lower, certify_upper, outward_round, project_feasible
from .errors import (
    CertificationError,
    ConvergenceError,
    DomainError,
    LineSearchError,
    MinresBreakdown,
    SolverError,
    StepError,
)
from .lower import LowerProblem, build_lower, lower_dual, lower_init
from .minres import LinearOperator, MinresResult, minres
from .newton import Iterate, NewtonConfig, SolveResult, solve
from .upper import ApproxUpperProblem, UpperProblem, build_approx_upper, build_upper, lift_approx_solution, upper_init

__version__ = "0.1.0"

__all__ = [
    "ApproxUpperProblem",
    "BoundCertificate",
    "CertificationError",
    "ConvergenceError",
    "DomainError",
    "Iterate",
    "LineSearchError",
    "LinearOperator",
    "LowerProblem",
    "MinresBreakdown",
    "MinresResult",
    "NewtonConfig",
    "SolveResult",
    "SolverError",
    "StepError",
    "UpperProblem",
    "build_approx_upper",
    "build_lower",
    "build_upper",
    "certify_lower",
    "certify_upper",
    "lift_approx_solution",
    "lower_dual",
    "lower_init",
    "minres",
    "outward_round",
    "project_feasible",
    "solve",
    "upper_init",
]
