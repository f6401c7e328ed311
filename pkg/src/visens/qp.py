"""Dense primal active-set solver for convex quadratic programs.

Solves::

    minimize    1/2 x^T H x + f^T x
    subject to  E x  = e
                G x <= h

``H`` must be positive semidefinite and positive definite on the null space
of the active constraints encountered along the way (in practice: strictly
convex problems, or projections onto cones).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, NonConvergence


@dataclass
class QPResult:
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    active: np.ndarray
    iterations: int


def _as_rows(M, n):
    if M is None:
        return np.zeros((0, n))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((0, n))
    return M


def _as_vec(v, k):
    if v is None:
        return np.zeros(k)
    return np.asarray(v, dtype=float).reshape(k)


def feasible_point(E, e, G, h, n):
    """Find some point of ``{E x = e, G x <= h}`` (phase one)."""
    if G.shape[0] == 0 and E.shape[0] == 0:
        return np.zeros(n)
    res = linprog(
        np.zeros(n),
        A_ub=G if G.shape[0] else None,
        b_ub=h if G.shape[0] else None,
        A_eq=E if E.shape[0] else None,
        b_eq=e if E.shape[0] else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status != 0:
        raise Infeasible(f"constraint set is empty ({res.message})")
    return np.asarray(res.x, dtype=float)


def _solve_eqp(H, g, C):
    """Step p and multipliers mu of min 1/2 p'Hp + g'p s.t. C p = 0."""
    n = H.shape[0]
    k = C.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = C.T
    K[n:, :n] = C
    rhs = np.concatenate([-g, np.zeros(k)])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def solve_qp(H, f, E=None, e=None, G=None, h=None, x0=None, working=None,
             tol=1e-12, max_iter=None):
    """Primal active-set method.

    Parameters
    ----------
    x0 : array_like, optional
        Feasible starting point. A phase-one LP is solved when omitted.
    working : array_like of int, optional
        Initial working set (indices into ``G``) for warm starts. Entries that
        are not active at ``x0`` are ignored.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    f = _as_vec(f, n)
    E = _as_rows(E, n)
    G = _as_rows(G, n)
    e = _as_vec(e, E.shape[0])
    h = _as_vec(h, G.shape[0])
    m = G.shape[0]
    scale = 1.0 + np.abs(h).max(initial=0.0)

    if x0 is None:
        x = feasible_point(E, e, G, h, n)
    else:
        x = np.asarray(x0, dtype=float).copy()
    if m and np.any(G @ x - h > 1e-8 * scale):
        x = feasible_point(E, e, G, h, n)

    if working is None:
        W = [i for i in range(m) if abs(G[i] @ x - h[i]) <= 1e-10 * scale]
    else:
        W = [int(i) for i in working if abs(G[int(i)] @ x - h[int(i)]) <= 1e-10 * scale]
    # keep the working set linearly independent together with E
    W = _independent(E, G, W)

    if max_iter is None:
        max_iter = 50 * (n + m + 1)
    hscale = 1.0 + np.abs(H).max(initial=0.0)
    for it in range(1, max_iter + 1):
        C = np.vstack([E, G[W]]) if W else E
        g = H @ x + f
        p, mu = _solve_eqp(H, g, C)
        if np.linalg.norm(p) <= tol * (1.0 + np.linalg.norm(x)):
            lam_w = mu[E.shape[0]:]
            if lam_w.size == 0 or lam_w.min() >= -tol * hscale * (1.0 + np.abs(g).max()):
                lam = np.zeros(m)
                lam[W] = np.maximum(lam_w, 0.0)
                active = np.zeros(m, dtype=bool)
                active[W] = True
                return QPResult(x, mu[:E.shape[0]], lam, active, it)
            W.pop(int(np.argmin(lam_w)))
            continue
        alpha = 1.0
        block = None
        if m:
            Gp = G @ p
            slack = h - G @ x
            for i in range(m):
                if i in W or Gp[i] <= 1e-14 * np.linalg.norm(p) * (1.0 + np.abs(G[i]).max()):
                    continue
                a = max(slack[i], 0.0) / Gp[i]
                if a < alpha:
                    alpha, block = a, i
        x = x + alpha * p
        if block is not None:
            W.append(block)
            W = _independent(E, G, W)
    raise NonConvergence("active-set QP did not terminate", iterations=max_iter)


def _independent(E, G, W):
    if not W:
        return []
    keep = []
    base = E.copy()
    r0 = np.linalg.matrix_rank(base) if base.shape[0] else 0
    for i in W:
        trial = np.vstack([base, G[i]])
        r = np.linalg.matrix_rank(trial)
        if r > r0:
            keep.append(i)
            base, r0 = trial, r
    return keep


def project_polyhedron(v, G, h, E=None, e=None, x0=None, working=None):
    """Euclidean projection of ``v`` onto ``{E x = e, G x <= h}``."""
    v = np.asarray(v, dtype=float)
    n = v.size
    return solve_qp(np.eye(n), -v, E, e, G, h, x0=x0, working=working)
