"""Parametrized variational inequalities and an elliptic VI solver.

The VI is: find ``x`` with ``<A(p, x), z - x> + j(z) - j(x) >= 0`` for all
``z``. Solutions are the zeros of the natural map
``F(x) = x - prox_{sigma j}(x - sigma A(p, x))``.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import InvalidInstance, InvalidStep, NonConvergence
from .functionals import NonsmoothFunctional


@dataclass
class ViProblem:
    dim_x: int
    dim_p: int
    operator: Callable
    operator_jac_x: Callable
    operator_jac_p: Callable
    nonsmooth: NonsmoothFunctional
    monotonicity_constant: float
    lipschitz_bound: Optional[float] = None
    name: str = "vi"

    def A(self, p, x):
        return np.asarray(self.operator(p, x), dtype=float)

    def Ax(self, p, x):
        return np.atleast_2d(np.asarray(self.operator_jac_x(p, x), dtype=float))

    def Ap(self, p, x):
        return np.asarray(self.operator_jac_p(p, x), dtype=float).reshape(self.dim_x, self.dim_p)

    def self_check(self, p, x, rng=None, samples=20, rtol=1e-5):
        """Compare the Jacobians with central differences and sample monotonicity.

        Raises InvalidInstance naming the violated invariant.
        """
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        jx = _central_jacobian(lambda v: self.A(p, v), x)
        jp = _central_jacobian(lambda v: self.A(v, x), p)
        for name, exact, fd in (("operator_jac_x", self.Ax(p, x), jx),
                                ("operator_jac_p", self.Ap(p, x), jp)):
            if np.abs(exact - fd).max() > rtol * (1.0 + np.abs(fd).max()):
                raise InvalidInstance(f"{name} disagrees with central differences", invariant=name)
        c = self.monotonicity_constant
        if c > 0:
            rng = np.random.default_rng(0) if rng is None else rng
            for _ in range(samples):
                x1 = x + rng.standard_normal(self.dim_x)
                x2 = x + rng.standard_normal(self.dim_x)
                d = x1 - x2
                lhs = float((self.A(p, x1) - self.A(p, x2)) @ d)
                if lhs < c * float(d @ d) * (1.0 - 1e-10):
                    raise InvalidInstance("strong monotonicity fails on a sampled pair",
                                          invariant="monotonicity_constant")
        return True


@dataclass
class ViSolution:
    x_bar: np.ndarray
    residual: float
    iterations: int
    sigma: float = 1.0
    multipliers: Optional[Any] = None
    info: dict = field(default_factory=dict)


def _central_jacobian(fun, x, h=None):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    J = np.zeros((f0.size, x.size))
    for k in range(x.size):
        step = (1e-6 if h is None else h) * (1.0 + abs(x[k]))
        e = np.zeros(x.size)
        e[k] = step
        J[:, k] = (np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * step)
    return J


def natural_map(problem, p, x, sigma):
    return x - problem.nonsmooth.prox(x - sigma * problem.A(p, x), sigma)


def estimate_lipschitz(problem, p, x, rng=None, samples=8):
    """Largest spectral norm of ``A_x`` over ``x`` and a few nearby points."""
    if problem.lipschitz_bound is not None:
        return float(problem.lipschitz_bound)
    rng = np.random.default_rng(12345) if rng is None else rng
    pts = [x] + [x + rng.standard_normal(x.size) for _ in range(samples)]
    return 1.1 * max(np.linalg.norm(problem.Ax(p, v), 2) for v in pts)


def step_size(problem, p, x):
    c = float(problem.monotonicity_constant)
    L = estimate_lipschitz(problem, p, x)
    if not (c > 0) or not np.isfinite(L) or L <= 0:
        raise InvalidStep(f"cannot derive a step from c={c!r}, L={L!r}")
    return c / L**2


def vi_residual(problem, p, x, sigma=None):
    """Natural-map defect ``|x - prox_{sigma j}(x - sigma A(p, x))|``.

    With ``sigma`` omitted the solver's step ``c / L^2`` is used.
    """
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if sigma is None:
        sigma = step_size(problem, p, x)
    return float(np.linalg.norm(natural_map(problem, p, x, sigma)))


def solve_elliptic_vi(problem, p, x0=None, tol=1e-10, max_iters=100_000, sigma=None):
    """Solve the VI at parameter ``p``.

    Semismooth Newton steps on the natural map are used whenever the
    functional supplies a prox Jacobian and the step decreases the residual;
    otherwise the method falls back to the fixed-point step
    ``x <- prox_{sigma j}(x - sigma A(p, x))`` with ``sigma = c / L^2``.

    Raises
    ------
    InvalidStep
        If no positive step can be derived.
    NonConvergence
        If the residual is still above ``tol`` after ``max_iters`` steps.
    """
    p = np.asarray(p, dtype=float)
    x = np.zeros(problem.dim_x) if x0 is None else np.array(x0, dtype=float)
    if sigma is None:
        sigma = step_size(problem, p, x)
    elif sigma <= 0:
        raise InvalidStep("step must be positive")
    j = problem.nonsmooth
    eye = np.eye(problem.dim_x)
    F = natural_map(problem, p, x, sigma)
    res = float(np.linalg.norm(F))
    newton_steps = 0
    for it in range(1, max_iters + 1):
        if res <= tol:
            x, res = _feasible_output(problem, p, x, F, res, sigma, tol)
            return ViSolution(x, res, it - 1, sigma, info={"newton_steps": newton_steps})
        v = x - sigma * problem.A(p, x)
        P = j.prox_jacobian(v, sigma)
        moved = False
        if P is not None:
            J = eye - P @ (eye - sigma * problem.Ax(p, x))
            try:
                d = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                d = None
            if d is not None and np.all(np.isfinite(d)):
                step = 1.0
                for _ in range(30):
                    xn = x + step * d
                    Fn = natural_map(problem, p, xn, sigma)
                    rn = float(np.linalg.norm(Fn))
                    if rn <= (1.0 - 1e-4 * step) * res:
                        x, F, res = xn, Fn, rn
                        moved = True
                        newton_steps += 1
                        break
                    step *= 0.5
        if not moved:
            x = j.prox(v, sigma)
            F = natural_map(problem, p, x, sigma)
            res = float(np.linalg.norm(F))
    if res <= tol:
        x, res = _feasible_output(problem, p, x, F, res, sigma, tol)
        return ViSolution(x, res, max_iters, sigma, info={"newton_steps": newton_steps})
    raise NonConvergence(f"residual {res:.3e} above tol {tol:.1e}", iterations=max_iters,
                         residual=res)


def _feasible_output(problem, p, x, F, res, sigma, tol):
    # x - F is a prox output, hence in dom(j); prefer it while it meets tol
    xf = x - F
    rf = float(np.linalg.norm(natural_map(problem, p, xf, sigma)))
    if rf <= tol:
        return xf, rf
    return x, res


def affine_problem(M, N=None, offset=None, nonsmooth=None, c=None, name="affine"):
    """``A(p, x) = M x + offset - N p`` (``N`` defaults to the identity)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    N = np.eye(n) if N is None else np.atleast_2d(np.asarray(N, dtype=float))
    b = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    if c is None:
        c = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    return ViProblem(
        dim_x=n,
        dim_p=N.shape[1],
        operator=lambda p, x: M @ x + b - N @ p,
        operator_jac_x=lambda p, x: M,
        operator_jac_p=lambda p, x: -N,
        nonsmooth=nonsmooth,
        monotonicity_constant=c,
        lipschitz_bound=float(np.linalg.norm(M, 2)),
        name=name,
    )
