"""Discretized static elastoplasticity as a saddle-point VI.

On ``N`` cells with weights ``mu_i`` the stress ``Sigma`` (cell-major, ``m``
entries per cell) solves::

    minimize 1/2 <A Sigma, Sigma>   subject to   B Sigma = ell,  |D Sigma_i| <= 1

with KKT system ``A Sigma + B^T u + Xi = 0``, ``Xi_i = mu_i lam_i D^T D Sigma_i``,
``lam_i >= 0`` and ``lam_i = 0`` on cells with ``|D Sigma_i| < 1``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .core import ViSolution
from .errors import Infeasible, InvalidInstance, NonConvergence
from .functionals import PointwiseBall, _cell_ball_projection
from .qp import solve_qp
from .subderiv import TAU_ACT, q_elastoplastic


@dataclass
class PlasticityInstance:
    weights: np.ndarray
    D: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def cells(self):
        return self.weights.size

    @property
    def m(self):
        return self.D.shape[1]

    @property
    def n(self):
        return self.D.shape[0]

    @property
    def dim(self):
        return self.cells * self.m

    @property
    def dim_V(self):
        return self.B.shape[0]

    def kernel_basis(self):
        """Orthonormal basis of ``H = {Sigma : D Sigma_i = 0 for all i}``."""
        Nd = null_space(self.D)
        k = Nd.shape[1]
        basis = np.zeros((self.dim, self.cells * k))
        for i in range(self.cells):
            basis[i * self.m:(i + 1) * self.m, i * k:(i + 1) * k] = Nd
        return basis

    def right_inverse(self):
        """``B~`` with ``B B~ = I`` and range in ``H`` (pseudoinverse based)."""
        NH = self.kernel_basis()
        return NH @ np.linalg.pinv(self.B @ NH)

    def xi(self, sigma, lam):
        S = np.asarray(sigma).reshape(self.cells, self.m)
        DtD = self.D.T @ self.D
        return ((self.weights * lam)[:, None] * (S @ DtD)).ravel()

    def functional(self):
        return PointwiseBall(self.D, self.cells)

    def to_config(self):
        return {"weights": self.weights.tolist(), "D": self.D.tolist(),
                "A": self.A.tolist(), "B": self.B.tolist()}


def build_instance(config, validate=True):
    """Build and validate an instance.

    ``config`` holds ``D``, ``A`` and ``B`` as nested lists (row-major) and
    either ``weights`` or ``cells`` (uniform weights ``1 / cells``).

    Raises
    ------
    InvalidInstance
        If ``A`` is not symmetric and coercive, or ``B`` restricted to ``H``
        is not onto.
    """
    D = np.atleast_2d(np.asarray(config["D"], dtype=float))
    if "weights" in config:
        w = np.asarray(config["weights"], dtype=float).ravel()
    else:
        w = np.full(int(config["cells"]), 1.0 / int(config["cells"]))
    A = np.atleast_2d(np.asarray(config["A"], dtype=float))
    B = np.atleast_2d(np.asarray(config["B"], dtype=float))
    inst = PlasticityInstance(w, D, A, B)
    if validate:
        validate_instance(inst)
    return inst


def validate_instance(inst):
    dim = inst.dim
    if inst.A.shape != (dim, dim) or inst.B.shape[1] != dim:
        raise InvalidInstance("matrix dimensions do not match cells * m", invariant="dimensions")
    if np.any(inst.weights <= 0):
        raise InvalidInstance("cell weights must be positive", invariant="weights")
    if np.abs(inst.A - inst.A.T).max() > 1e-12 * (1.0 + np.abs(inst.A).max()):
        raise InvalidInstance("A is not symmetric", invariant="A_symmetric")
    alpha = float(np.linalg.eigvalsh(inst.A).min())
    if alpha <= 1e-12 * (1.0 + np.abs(inst.A).max()):
        raise InvalidInstance(f"A is not coercive (min eigenvalue {alpha:.3e})",
                              invariant="A_coercive")
    NH = inst.kernel_basis()
    rank = np.linalg.matrix_rank(inst.B @ NH) if NH.shape[1] else 0
    if rank != inst.dim_V:
        raise InvalidInstance(f"B restricted to ker D has rank {rank}, expected {inst.dim_V}",
                              invariant="B_surjective_on_H")
    return True


def random_instance(seed, cells=8, m=3, n=2, dim_V=None):
    """Seeded instance satisfying the validation invariants."""
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n, m))
    dim = cells * m
    R = rng.standard_normal((dim, dim))
    A = R @ R.T / dim + np.eye(dim)
    kdim = cells * (m - np.linalg.matrix_rank(D))
    if dim_V is None:
        dim_V = max(1, min(kdim, cells // 2 + 1))
    B = rng.standard_normal((dim_V, dim))
    inst = PlasticityInstance(np.full(cells, 1.0 / cells) * rng.uniform(0.5, 1.5, cells), D, A, B)
    validate_instance(inst)
    return inst


def scaled_load(inst, seed, target=1.3):
    """A load whose elastic response has median cell norm ``target``."""
    rng = np.random.default_rng(seed)
    ell = rng.standard_normal(inst.dim_V)
    sig = _elastic(inst, ell)
    norms = np.linalg.norm(sig.reshape(inst.cells, inst.m) @ inst.D.T, axis=1)
    return ell * target / max(np.median(norms), 1e-12)


def _elastic(inst, ell):
    dim, k = inst.dim, inst.dim_V
    K = np.block([[inst.A, inst.B.T], [inst.B, np.zeros((k, k))]])
    sol = np.linalg.lstsq(K, np.concatenate([np.zeros(dim), ell]), rcond=None)[0]
    return sol[:dim]


def _admm(inst, ell, iters=3000, rho=1.0, tol=1e-9, z0=None):
    dim, k = inst.dim, inst.dim_V
    K = np.block([[inst.A + rho * np.eye(dim), inst.B.T], [inst.B, np.zeros((k, k))]])
    Kinv = np.linalg.pinv(K)
    z = np.zeros(dim) if z0 is None else z0.copy()
    w = np.zeros(dim)
    S = z
    for _ in range(iters):
        rhs = np.concatenate([rho * (z - w), ell])
        S = (Kinv @ rhs)[:dim]
        z_old = z
        z = _cell_ball_projection((S + w).reshape(inst.cells, inst.m), inst.D).ravel()
        w = w + S - z
        if np.linalg.norm(S - z) <= tol and rho * np.linalg.norm(z - z_old) <= tol:
            break
    return z, w * rho


def _newton_polish(inst, ell, S, W, lam0, tol=1e-14, max_iter=50):
    """Newton on the KKT system with the cells in ``W`` held active."""
    dim, k = inst.dim, inst.dim_V
    m = inst.m
    DtD = inst.D.T @ inst.D
    mu = inst.weights
    W = list(W)
    nu = np.zeros(k)
    lam = np.array([lam0[i] for i in W], dtype=float)
    S = S.copy()
    for _ in range(max_iter):
        Sc = S.reshape(inst.cells, m)
        grad = inst.A @ S
        cols = np.zeros((dim, len(W)))
        Hc = inst.A.copy()
        cons = np.zeros(len(W))
        for a, i in enumerate(W):
            v = DtD @ Sc[i]
            cols[i * m:(i + 1) * m, a] = mu[i] * v
            Hc[i * m:(i + 1) * m, i * m:(i + 1) * m] += mu[i] * lam[a] * DtD
            cons[a] = 0.5 * (float(Sc[i] @ v) - 1.0)
        r1 = grad + inst.B.T @ nu + cols @ lam
        r2 = inst.B @ S - ell
        F = np.concatenate([r1, r2, cons])
        if np.linalg.norm(F) <= tol * (1.0 + np.linalg.norm(S)):
            break
        nW = len(W)
        J = np.zeros((dim + k + nW, dim + k + nW))
        J[:dim, :dim] = Hc
        J[:dim, dim:dim + k] = inst.B.T
        J[:dim, dim + k:] = cols
        J[dim:dim + k, :dim] = inst.B
        J[dim + k:, :dim] = (cols / mu[W][None, :]).T if nW else np.zeros((0, dim))
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(J, -F, rcond=None)[0]
        S = S + d[:dim]
        nu = nu + d[dim:dim + k]
        lam = lam + d[dim + k:]
    full = np.zeros(inst.cells)
    for a, i in enumerate(W):
        full[i] = lam[a]
    return S, nu, full, float(np.linalg.norm(F))


def recover_u(inst, sigma, lam=None):
    """``u = -B~^T A Sigma``; least squares when ``B`` is not onto from ``H``."""
    NH = inst.kernel_basis()
    if NH.shape[1] and np.linalg.matrix_rank(inst.B @ NH) == inst.dim_V:
        return -inst.right_inverse().T @ (inst.A @ sigma)
    return np.linalg.lstsq(inst.B.T, -(inst.A @ sigma), rcond=None)[0]


def solve_saddle_vi(inst, ell, tol=1e-12, warm=None):
    """Stress, displacement multiplier and plastic multiplier for load ``ell``.

    ADMM identifies the plastic cells; Newton on the KKT system with an
    active-set correction loop then polishes the solution to machine
    precision.

    Returns
    -------
    ViSolution
        ``x_bar`` is ``Sigma``; ``multipliers`` holds ``u``, ``lam`` and ``xi``.
    """
    ell = np.asarray(ell, dtype=float).reshape(inst.dim_V)
    NH = inst.kernel_basis()
    if NH.shape[1] == 0 or np.linalg.matrix_rank(inst.B @ NH) < inst.dim_V:
        # B is not onto from H; the constraint set may still contain a solution
        res = solve_qp_fallback(inst, ell)
        return res
    if warm is None:
        S, Xi = _admm(inst, ell)
    else:
        S, Xi = warm
    norms = np.linalg.norm(S.reshape(inst.cells, inst.m) @ inst.D.T, axis=1)
    DtD = inst.D.T @ inst.D
    lam0 = np.zeros(inst.cells)
    for i in range(inst.cells):
        v = DtD @ S[i * inst.m:(i + 1) * inst.m]
        vv = float(v @ v)
        if vv > 0:
            lam0[i] = max(float(Xi[i * inst.m:(i + 1) * inst.m] @ v) / (inst.weights[i] * vv), 0.0)
    W = [i for i in range(inst.cells) if norms[i] >= 1.0 - 1e-4]
    for _ in range(4 * inst.cells + 4):
        Sn, nu, lam, res = _newton_polish(inst, ell, S, W, lam0)
        norms_n = np.linalg.norm(Sn.reshape(inst.cells, inst.m) @ inst.D.T, axis=1)
        neg = [i for i in W if lam[i] < -TAU_ACT]
        viol = [i for i in range(inst.cells) if i not in W and norms_n[i] > 1.0 + TAU_ACT]
        if not neg and not viol and res <= 1e-10 * (1.0 + np.linalg.norm(Sn)):
            lam = np.maximum(lam, 0.0)
            u = recover_u(inst, Sn)
            xi = inst.xi(Sn, lam)
            kkt = float(np.linalg.norm(inst.A @ Sn + inst.B.T @ u + xi))
            return ViSolution(Sn, kkt, 0, multipliers={"u": u, "lam": lam, "xi": xi},
                              info={"active": W, "newton_residual": res})
        if neg:
            W.remove(min(neg, key=lambda i: lam[i]))
        if viol:
            W.append(max(viol, key=lambda i: norms_n[i]))
            W.sort()
        lam0 = np.where(np.isin(np.arange(inst.cells), W), np.maximum(lam, 0.0), 0.0)
        S = Sn if not viol else S
    raise NonConvergence("active-set correction for the plastic cells did not settle")


def solve_qp_fallback(inst, ell):
    """Small or degenerate instances: a direct solve over the feasible set.

    Used when ``B`` is not onto from ``H`` (for example a single cell with
    ``m = n = 1``). The feasible set is checked first.
    """
    dim = inst.dim
    if inst.m == inst.n and np.allclose(inst.D, np.diag(np.diag(inst.D))):
        # box constraints |d_k Sigma_ik| <= 1 cell by cell: a convex QP
        d = np.abs(np.diag(inst.D))
        ub = np.tile(1.0 / d, inst.cells)
        G = np.vstack([np.eye(dim), -np.eye(dim)])
        h = np.concatenate([ub, ub])
        try:
            res = solve_qp(inst.A, np.zeros(dim), E=inst.B, e=ell, G=G, h=h)
        except Infeasible:
            raise Infeasible("B Sigma = ell has no solution in K") from None
        S = res.x
    else:
        S, _ = _admm(inst, ell, iters=20000, tol=1e-12)
        if np.linalg.norm(inst.B @ S - ell) > 1e-8 * (1.0 + np.linalg.norm(ell)):
            raise Infeasible("B Sigma = ell has no solution in K")
    u = np.linalg.lstsq(inst.B.T, -(inst.A @ S), rcond=None)[0]
    r = -(inst.A @ S + inst.B.T @ u)
    DtD = inst.D.T @ inst.D
    lam = np.zeros(inst.cells)
    for i in range(inst.cells):
        v = DtD @ S[i * inst.m:(i + 1) * inst.m]
        vv = float(v @ v)
        norm = np.linalg.norm(inst.D @ S[i * inst.m:(i + 1) * inst.m])
        if vv > 0 and norm >= 1.0 - TAU_ACT:
            lam[i] = max(float(r[i * inst.m:(i + 1) * inst.m] @ v) / (inst.weights[i] * vv), 0.0)
    xi = inst.xi(S, lam)
    kkt = float(np.linalg.norm(inst.A @ S + inst.B.T @ u + xi))
    return ViSolution(S, kkt, 0, multipliers={"u": u, "lam": lam, "xi": xi},
                      info={"fallback": True})


def solve_plasticity(inst, ell, **kwargs):
    """``(Sigma, u, lam)`` for load ``ell``."""
    sol = solve_saddle_vi(inst, ell, **kwargs)
    return sol.x_bar, sol.multipliers["u"], sol.multipliers["lam"]


def plasticity_derivative(inst, sigma, u, lam, dell):
    """Directional derivative ``(Sigma', u')`` of the solution in direction ``dell``.

    ``Sigma'`` minimizes ``1/2 <A T, T> + 1/2 sum mu_i lam_i |D T_i|^2`` over the
    reduced critical cone subject to ``B T = dell``; ``u' = -B~^T A Sigma'``.
    """
    dell = np.asarray(dell, dtype=float).reshape(inst.dim_V)
    xi = inst.xi(sigma, lam)
    Q = q_elastoplastic(inst.D, inst.weights, sigma, xi)
    Hm = inst.A + Q.hessian
    cone = Q.cone
    E = np.vstack([inst.B, cone.eq]) if cone.eq.shape[0] else inst.B
    e = np.concatenate([dell, np.zeros(cone.eq.shape[0])])
    if cone.ineq.shape[0] == 0:
        k = E.shape[0]
        K = np.block([[Hm, E.T], [E, np.zeros((k, k))]])
        sol = np.linalg.lstsq(K, np.concatenate([np.zeros(inst.dim), e]), rcond=None)[0]
        T = sol[:inst.dim]
        if np.linalg.norm(E @ T - e) > 1e-9 * (1.0 + np.linalg.norm(e)):
            raise Infeasible("no direction in the critical cone matches the load change")
    else:
        T = solve_qp(Hm, np.zeros(inst.dim), E=E, e=e, G=cone.ineq,
                     h=np.zeros(cone.ineq.shape[0])).x
    u_prime = recover_u(inst, T)
    return T, u_prime, Q


def _solve_warm(inst, ell, warm):
    try:
        return solve_saddle_vi(inst, ell, warm=warm)
    except NonConvergence:
        return solve_saddle_vi(inst, ell)


def lipschitz_batches(inst, ell, batches=5, per_batch=20, radius=0.5, seed=0):
    """Largest ``(|dSigma| + |du|) / |d ell|`` per batch of sampled load pairs."""
    rng = np.random.default_rng(seed)
    base = solve_saddle_vi(inst, ell)
    warm = (base.x_bar, base.multipliers["xi"])
    out = []
    for _ in range(batches):
        best = 0.0
        for _ in range(per_batch):
            l1 = ell + radius * rng.standard_normal(inst.dim_V)
            l2 = l1 + radius * rng.standard_normal(inst.dim_V)
            s1 = _solve_warm(inst, l1, warm)
            s2 = _solve_warm(inst, l2, (s1.x_bar, s1.multipliers["xi"]))
            num = np.linalg.norm(s1.x_bar - s2.x_bar) + np.linalg.norm(
                s1.multipliers["u"] - s2.multipliers["u"])
            best = max(best, num / np.linalg.norm(l1 - l2))
        out.append(best)
    return out
