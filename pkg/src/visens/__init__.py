"""Differential sensitivity of variational inequalities.

Solvers for parametrized VIs ``<A(p, x), z - x> + j(z) - j(x) >= 0``,
closed-form second subderivatives with a brute-force oracle, the derivative
VI, finite-difference verification harnesses and three applications
(elastoplasticity, projections onto prox-regular sets, bang-bang control).
"""

from .core import ViProblem, ViSolution, affine_problem, solve_elliptic_vi, vi_residual
from .derivative import DerivativeSolution, check_necessary_conditions, solve_derivative_vi
from .errors import VisensError
from .fd import FdReport, run_ray, verify_convergence
from .subderiv import QuadraticSubderivative, catalog_subderivative, q_bruteforce_oracle

__version__ = "0.1.0"

__all__ = [
    "DerivativeSolution", "FdReport", "QuadraticSubderivative", "ViProblem", "ViSolution",
    "VisensError", "affine_problem", "catalog_subderivative", "check_necessary_conditions",
    "q_bruteforce_oracle", "run_ray", "solve_derivative_vi", "solve_elliptic_vi",
    "verify_convergence", "vi_residual",
]
