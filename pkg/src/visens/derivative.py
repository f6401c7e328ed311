"""The derivative VI and the necessary-condition checks.

Given ``b = A_p q`` the derivative ``y`` solves::

    <b + A_x y, z - y> + 1/2 Q(z) - 1/2 Q(y) >= 0   for all z in the cone

with ``Q(z) = z^T H z`` on a polyhedral cone. Everything is solved in an
orthonormal basis of the cone's span, where the cone becomes ``{G w <= 0}``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, NotCoercive
from .qp import solve_qp


@dataclass
class DerivativeSolution:
    q: np.ndarray
    y: np.ndarray
    q_value: float
    vi_residual: float
    value_identity_gap: float
    method: str = ""
    iterations: int = 0
    contraction_factors: list = field(default_factory=list)

    def to_dict(self):
        return {
            "q": np.asarray(self.q).tolist(),
            "y": np.asarray(self.y).tolist(),
            "q_value": self.q_value,
            "vi_residual": self.vi_residual,
            "value_identity_gap": self.value_identity_gap,
            "method": self.method,
            "iterations": self.iterations,
        }


def _reduced(cone, M, H, b):
    N = cone.span_basis()
    G = cone.ineq @ N if cone.ineq.shape[0] else np.zeros((0, N.shape[1]))
    if G.shape[0]:
        keep = np.linalg.norm(G, axis=1) > 1e-12 * (1.0 + np.abs(cone.ineq).max())
        G = G[keep]
    return N, N.T @ M @ N, N.T @ H @ N, N.T @ b, G


def _cone_qp(Hq, f, G, w0=None, working=None, tol=1e-13):
    if G.shape[0] == 0:
        return np.linalg.solve(Hq, -f), None
    x0 = np.zeros(f.size) if w0 is None else w0
    res = solve_qp(Hq, f, G=G, h=np.zeros(G.shape[0]), x0=x0, working=working, tol=tol)
    return res.x, np.flatnonzero(res.active)


def derivative_residual(M, H, b, cone, y):
    """Natural-map defect of the derivative VI at ``y``.

    The prox of ``1/2 Q + delta_cone`` with step ``s = 1 / (|M| + |H|)`` is
    itself a small convex QP.
    """
    N, Mr, Hr, br, G = _reduced(cone, M, H, b)
    y = np.asarray(y, dtype=float)
    off = y - N @ (N.T @ y)
    if N.shape[1] == 0:
        return float(np.linalg.norm(y))
    w = N.T @ y
    s = 1.0 / (np.linalg.norm(M, 2) + np.linalg.norm(H, 2) + 1e-300)
    v = w - s * (br + Mr @ w)
    k = w.size
    wp, _ = _cone_qp(np.eye(k) + s * Hr, -v, G, w0=np.zeros(k))
    return float(np.hypot(np.linalg.norm(w - wp), np.linalg.norm(off))) / s


def solve_derivative_vi(Ap, Ax, Q, q, tol=1e-12, max_outer=200, max_inner=500):
    """Solve the derivative VI for direction ``q``.

    Dispatch by structure:

    * subspace cone: one linear solve on the span;
    * symmetric ``A_x``: a convex QP over the cone;
    * nonsymmetric ``A_x`` on a cone with inequalities: the outer contraction
      ``y = T(u)`` with ``eps = c / (2 |A_x|)``, where ``T(u)`` solves the VI
      with operator ``(1 + eps) A_x`` and right-hand side ``b - eps A_x u``.
      Each inner VI is solved by freezing its skew part (one convex QP per
      sweep).

    Raises
    ------
    NotCoercive
        If ``A_x + H`` (or ``A_x`` when ``Q`` is nonnegative) is not positive
        definite on the span of the cone.
    """
    Ap = np.atleast_2d(np.asarray(Ap, dtype=float))
    M = np.atleast_2d(np.asarray(Ax, dtype=float))
    q = np.asarray(q, dtype=float)
    H = np.asarray(Q.hessian, dtype=float)
    n = M.shape[0]
    b = Ap @ q
    cone = Q.cone
    N, Mr, Hr, br, G = _reduced(cone, M, H, b)
    k = N.shape[1]
    if k == 0:
        y = np.zeros(n)
        return _finish(q, y, M, H, b, cone, Q, "trivial_cone", 0, [])

    Sr = 0.5 * (Mr + Mr.T)
    total = Sr + Hr
    cmin = float(np.linalg.eigvalsh(0.5 * (total + total.T)).min())
    if cmin <= 0:
        raise NotCoercive(f"A_x + Q is not coercive on the cone (eigenvalue {cmin:.3e})",
                          eigenvalue=cmin)

    symmetric = np.abs(Mr - Mr.T).max() <= 1e-14 * (1.0 + np.abs(Mr).max())
    if G.shape[0] == 0:
        w = np.linalg.solve(Mr + Hr, -br)
        return _finish(q, N @ w, M, H, b, cone, Q, "linear_solve", 1, [])
    if symmetric:
        w, _ = _cone_qp(0.5 * (total + total.T), br, G)
        return _finish(q, N @ w, M, H, b, cone, Q, "cone_qp", 1, [])

    c = float(np.linalg.eigvalsh(Sr).min())
    if c <= 0:
        raise NotCoercive(f"A_x is not coercive on the cone (eigenvalue {c:.3e})", eigenvalue=c)
    normA = float(np.linalg.norm(Mr, 2))
    eps = c / (2.0 * normA)
    A1 = (1.0 + eps) * Mr
    S1 = 0.5 * (A1 + A1.T)
    W1 = 0.5 * (A1 - A1.T)
    ev, V = np.linalg.eigh(S1)
    Sih = V @ np.diag(ev**-0.5) @ V.T
    omega = float(np.linalg.norm(Sih @ W1 @ Sih, 2))
    kappa = 1.0 + omega**2
    inner_factor = omega / np.sqrt(1.0 + omega**2)
    outer_factor = eps * normA / ((1.0 + eps) * c)
    Hin = kappa * S1 + Hr
    Hin = 0.5 * (Hin + Hin.T)
    lag = A1 - kappa * S1

    u = np.zeros(k)
    yk = np.zeros(k)
    working = None
    inner_total = 0
    for outer in range(1, max_outer + 1):
        rhs = br - eps * (Mr @ u)
        inner_tol = max(tol, 1e-3 * outer_factor ** outer)
        for inner in range(max_inner):
            w_new, working = _cone_qp(Hin, rhs + lag @ yk, G, w0=yk, working=working)
            inner_total += 1
            step = np.linalg.norm(w_new - yk)
            yk = w_new
            if step <= inner_tol * (1.0 + np.linalg.norm(yk)):
                break
        change = np.linalg.norm(yk - u)
        u = yk.copy()
        if change <= tol * (1.0 + np.linalg.norm(u)):
            return _finish(q, N @ u, M, H, b, cone, Q, "epsilon_contraction", outer,
                           [outer_factor, inner_factor], inner_total)
    raise NonConvergence("derivative VI contraction did not converge", iterations=max_outer)


def _finish(q, y, M, H, b, cone, Q, method, iterations, factors, inner=None):
    qv = float(y @ H @ y)
    gap = abs(qv + float((b + M @ y) @ y))
    res = derivative_residual(M, H, b, cone, y)
    sol = DerivativeSolution(q, y, qv, float(res), float(gap), method, iterations, list(factors))
    return sol


def check_necessary_conditions(sol, Q, Ap, Ax, samples=1000, seed=0):
    """Evaluate the linearized VI on sampled cone points and the value identity.

    Returns a dict with ``min_value`` (the most negative value of
    ``<A_p q + A_x y, z - y> + 1/2 Q(z) - 1/2 Q(y)`` over the samples, which
    should be ``>= -tol``), ``value_identity_gap``, ``cone_membership`` of
    ``y`` and the number of sampled points.
    """
    rng = np.random.default_rng(seed)
    Ax = np.atleast_2d(np.asarray(Ax, dtype=float))
    b = np.atleast_2d(np.asarray(Ap, dtype=float)) @ np.asarray(sol.q, dtype=float)
    y = np.asarray(sol.y, dtype=float)
    Z = Q.cone.sample(rng, samples)
    Z = np.vstack([Z, np.zeros_like(y), 0.5 * y, 2.0 * y])
    grad = b + Ax @ y
    qy = Q.quad(y)
    vals = (Z - y) @ grad + 0.5 * Q.quad_rows(Z) - 0.5 * qy
    return {
        "min_value": float(vals.min()),
        "value_identity_gap": abs(qy + float(grad @ y)),
        "cone_membership": bool(Q.cone.contains(y)),
        "samples": int(Z.shape[0]),
    }
