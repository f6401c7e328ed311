"""Difference quotients along parameter rays and their convergence checks."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import solve_elliptic_vi
from .errors import RayError, VisensError

DEFAULT_T_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)


@dataclass
class FdReport:
    t_grid: list
    quotients: list
    soq_values: list
    lipschitz_ratios: list
    x_bar0: np.ndarray
    a0: np.ndarray
    errors: list = field(default_factory=list)
    quadform_gaps: list = field(default_factory=list)
    fitted_rate: Optional[float] = None
    lipschitz_bound: Optional[float] = None

    def to_dict(self):
        return {
            "t_grid": [float(t) for t in self.t_grid],
            "quotients": [np.asarray(y).tolist() for y in self.quotients],
            "errors": [float(e) for e in self.errors],
            "soq_values": [float(s) for s in self.soq_values],
            "lipschitz_ratios": [float(r) for r in self.lipschitz_ratios],
            "quadform_gaps": [float(g) for g in self.quadform_gaps],
            "fitted_rate": self.fitted_rate,
        }

    def csv_rows(self):
        """Rows with the fixed columns ``t, error, soq, lipschitz_ratio, quadform_gap``."""
        rows = []
        for k, t in enumerate(self.t_grid):
            err = self.errors[k] if k < len(self.errors) else float("nan")
            gap = self.quadform_gaps[k] if k < len(self.quadform_gaps) else float("nan")
            rows.append((float(t), float(err), float(self.soq_values[k]),
                         float(self.lipschitz_ratios[k]), float(gap)))
        return rows


def second_order_quotient(j, x0, a0, y, t):
    """``(j(x0 + t y) - j(x0) - t <a0, y>) / (t^2 / 2)``."""
    return (j(x0 + t * y) - j(x0) - t * float(a0 @ y)) / (0.5 * t * t)


def run_ray(problem, p0, q, t_grid=DEFAULT_T_GRID, tol=1e-13, x0=None, lipschitz_bound=None):
    """Solve the VI at ``p0 + t q`` for each ``t`` and form the quotients.

    The grid is traversed from the largest to the smallest ``t`` and each
    solve is warm-started from the previous solution. Solver failures are
    re-raised as :class:`RayError` carrying the offending ``t``.
    """
    p0 = np.asarray(p0, dtype=float)
    q = np.asarray(q, dtype=float)
    try:
        base = solve_elliptic_vi(problem, p0, x0=x0, tol=tol)
    except VisensError as exc:
        raise RayError(0.0, exc) from exc
    x_bar0 = base.x_bar
    a0 = -problem.A(p0, x_bar0)
    j = problem.nonsmooth
    ts = sorted((float(t) for t in t_grid), reverse=True)
    quotients, soq, lip = [], [], []
    warm = x_bar0
    for t in ts:
        try:
            sol = solve_elliptic_vi(problem, p0 + t * q, x0=warm, tol=tol)
        except VisensError as exc:
            raise RayError(t, exc) from exc
        warm = sol.x_bar
        y_t = (sol.x_bar - x_bar0) / t
        quotients.append(y_t)
        soq.append(second_order_quotient(j, x_bar0, a0, y_t, t))
        lip.append(float(np.linalg.norm(sol.x_bar - x_bar0)) / t)
    return FdReport(ts, quotients, soq, lip, x_bar0, a0, lipschitz_bound=lipschitz_bound)


def richardson(t, values, points=3):
    """Limit at ``t = 0`` from a linear fit through the smallest step sizes."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    order = np.argsort(t)[:points]
    if order.size < 2:
        return float(v[order[0]])
    coef = np.polyfit(t[order], v[order], 1)
    return float(coef[1])


def fit_rate(t, errors, floor=1e-13):
    """Slope of ``log(error)`` against ``log(t)``; ``None`` if errors vanish.

    ``floor`` is a scalar or one value per ``t``; errors at or below it are
    treated as rounding noise and left out of the fit.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > np.broadcast_to(np.asarray(floor, dtype=float), e.shape)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(t[keep]), np.log(e[keep]), 1)[0])


def verify_convergence(report, sol, Q=None, Ax=None, tol_conv=1e-6, tol_soq=1e-4,
                       noise=1e-12, soq_points=3):
    """Check the quotients of ``report`` against the derivative ``sol``.

    Criteria: the errors ``|y_t - y|`` do not increase (up to ``noise``) and
    end below ``tol_conv``; the extrapolated second-order quotient matches
    ``Q(y)`` within ``tol_soq``; ``<A_x y_t, y_t>`` approaches
    ``<A_x y, y>``; the Lipschitz ratios stay below the configured bound.
    """
    y = np.asarray(sol.y, dtype=float)
    errors = [float(np.linalg.norm(yt - y)) for yt in report.quotients]
    report.errors = errors
    items = {}
    slack = [noise * (1.0 + np.linalg.norm(y)) / t for t in report.t_grid]
    report.fitted_rate = fit_rate(report.t_grid, errors, floor=[10.0 * s for s in slack])
    monotone = all(errors[k + 1] <= errors[k] + slack[k + 1] + slack[k]
                   for k in range(len(errors) - 1))
    items["errors_decreasing"] = bool(monotone)
    items["final_error"] = bool(errors[-1] <= tol_conv)
    qy = sol.q_value if Q is None else Q.quad(y)
    soq_limit = richardson(report.t_grid, report.soq_values, soq_points)
    items["soq_limit"] = bool(abs(soq_limit - qy) <= tol_soq)
    if Ax is not None:
        Ax = np.atleast_2d(np.asarray(Ax, dtype=float))
        target = float(y @ Ax @ y)
        gaps = [abs(float(yt @ Ax @ yt) - target) for yt in report.quotients]
        report.quadform_gaps = gaps
        bound = 2.0 * tol_conv * np.linalg.norm(Ax, 2) * (1.0 + np.linalg.norm(y)) + tol_conv
        items["quadform_limit"] = bool(gaps[-1] <= bound)
    if report.lipschitz_bound is not None:
        items["lipschitz_bounded"] = bool(max(report.lipschitz_ratios)
                                          <= report.lipschitz_bound * (1.0 + 1e-9))
    return {
        "passed": all(items.values()),
        "items": items,
        "final_error": errors[-1],
        "soq_limit": soq_limit,
        "q_value": float(qy),
        "fitted_rate": report.fitted_rate,
    }


def difference_quotient_check(problem, p0, q, report, samples=100, seed=0, tol=1e-13):
    """Sampled check of the VI satisfied by each difference quotient.

    For every ``t`` and sampled ``z`` with ``x_bar0 + t z`` in ``dom(j)``::

        <A_p q + A_x y_t, z - y_t> + 1/2 s_t(z) - 1/2 s_t(y_t) + rhat(t) |z - y_t| >= 0

    where ``s_t`` is the second-order quotient and ``rhat(t)`` is the Taylor
    defect of ``A`` divided by ``t``. Returns the smallest value found per
    ``t`` after adding the slack ``4 tol / t^2`` coming from the solver
    tolerance.
    """
    rng = np.random.default_rng(seed)
    p0 = np.asarray(p0, dtype=float)
    x0 = report.x_bar0
    a0 = report.a0
    j = problem.nonsmooth
    Ap = problem.Ap(p0, x0)
    Ax = problem.Ax(p0, x0)
    mins = []
    for t, yt in zip(report.t_grid, report.quotients):
        xt = x0 + t * yt
        r = problem.A(p0 + t * q, xt) - problem.A(p0, x0) - t * (Ap @ q + Ax @ yt)
        rhat = float(np.linalg.norm(r)) / t
        W = yt + rng.standard_normal((samples, yt.size))
        Z = (j.restore(x0 + t * W) - x0) / t
        grad = Ap @ q + Ax @ yt
        s_y = second_order_quotient(j, x0, a0, yt, t)
        vals = []
        for z in Z:
            s_z = second_order_quotient(j, x0, a0, z, t)
            if not np.isfinite(s_z):
                continue
            vals.append(float(grad @ (z - yt)) + 0.5 * s_z - 0.5 * s_y
                        + rhat * float(np.linalg.norm(z - yt)))
        slack = 4.0 * tol * (1.0 + np.linalg.norm(x0)) / t**2
        mins.append((min(vals) if vals else float("inf")) + slack)
    return mins
