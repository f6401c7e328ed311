"""Second subderivatives: closed-form catalog and a brute-force oracle.

A second subderivative of ``j`` at ``x`` for the slope ``g`` is represented as
a cone together with a quadratic form ``Q(z) = z^T H z`` on that cone (and
``+inf`` off it). All catalog entries in this module have that structure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from scipy.special import ndtri
from scipy.stats import qmc

from .cones import PolyhedralCone
from .errors import NotNormal
from .functionals import Box, BallComplement, HalfSquaredNormPlus, Polyhedron, ScaledL1

TAU_ACT = 1e-9
INF = float("inf")


@dataclass
class QuadraticSubderivative:
    cone: PolyhedralCone
    hessian: np.ndarray
    base_point: np.ndarray
    slope: np.ndarray
    label: str = "custom"
    extra: dict = field(default_factory=dict)

    def quad(self, z):
        """``Q(z)`` for ``z`` in the cone (membership is not checked)."""
        z = np.asarray(z, dtype=float)
        return float(z @ self.hessian @ z)

    def value(self, z, tol=1e-9):
        """``Q(z)`` with ``+inf`` outside the cone."""
        return self.quad(z) if self.cone.contains(z, tol) else INF

    def quad_rows(self, Z):
        return np.einsum("ij,jk,ik->i", Z, self.hessian, Z)

    def bilinear(self, z1, z2):
        return float(np.asarray(z1) @ self.hessian @ np.asarray(z2))

    @property
    def is_zero(self):
        return not np.any(self.hessian)

    def describe(self):
        return {"label": self.label, "cone": self.cone.describe(),
                "hessian": np.asarray(self.hessian).tolist()}


def _normal_multipliers(rows, g, tol):
    """Nonnegative ``lam`` with ``rows^T lam = g``; raises NotNormal otherwise."""
    n = g.size
    if rows.shape[0] == 0:
        if np.linalg.norm(g) > tol * (1.0 + np.linalg.norm(g)):
            raise NotNormal("slope is nonzero at an interior point")
        return np.zeros(0)
    lam, resid = nnls(rows.T, g)
    if resid > max(tol, 1e-7) * (1.0 + np.linalg.norm(g)):
        raise NotNormal(f"slope is not in the normal cone (residual {resid:.3e})")
    return lam


def q_polyhedric(G, h, x, g, tol=TAU_ACT):
    """Cone ``T_K(x) ∩ g^perp`` and ``Q = 0`` for ``K = {G x <= h}``.

    ``G`` may also be a :class:`Box` or :class:`Polyhedron` functional, in
    which case ``h`` is ignored.
    """
    if isinstance(G, Box):
        n = G.lower.size
        rows = np.vstack([np.eye(n), -np.eye(n)])
        rhs = np.concatenate([G.upper, -G.lower])
        G, h = rows, rhs
    elif isinstance(G, Polyhedron):
        G, h = G.G, G.h
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    n = x.size
    scale = 1.0 + np.abs(h).max(initial=0.0)
    slack = G @ x - h
    if np.any(slack > tol * scale):
        raise NotNormal("base point is outside the polyhedron")
    active = np.flatnonzero(np.abs(slack) <= tol * scale)
    lam = _normal_multipliers(G[active], g, tol)
    strict = lam > tol * (1.0 + np.abs(lam).max(initial=0.0))
    eq = G[active[strict]]
    ineq = G[active[~strict]]
    cone = PolyhedralCone(n, eq, ineq)
    return QuadraticSubderivative(cone, np.zeros((n, n)), x, g, label="polyhedric",
                                  extra={"multipliers": lam.tolist()})


def q_one_norm(weights, x, g, tol=TAU_ACT):
    """Cone and ``Q = 0`` for ``j(x) = sum w_i |x_i|``."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    n = x.size
    eq, ineq = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if abs(x[i]) > tol:
            if abs(g[i] - w[i] * np.sign(x[i])) > 1e-7 * (1.0 + w[i]):
                raise NotNormal(f"slope component {i} does not match the sign of x")
            continue
        if abs(g[i]) > w[i] + 1e-7 * (1.0 + w[i]):
            raise NotNormal(f"|g_{i}| exceeds the weight")
        if w[i] - abs(g[i]) > tol * (1.0 + w[i]):
            eq.append(e)
        elif w[i] == 0.0:
            continue
        else:
            # g_i = +w or -w: only directions with sign(z_i) = sign(g_i) stay finite
            ineq.append(-np.sign(g[i]) * e)
    cone = PolyhedralCone(n, eq, ineq)
    return QuadraticSubderivative(cone, np.zeros((n, n)), x, g, label="one_norm")


def q_elastoplastic(D, weights, sigma, xi, tol=TAU_ACT):
    """Second subderivative of the pointwise ball constraint ``|D Sigma_i| <= 1``.

    Parameters
    ----------
    D : (n, m) array
    weights : (N,) array
        Cell weights ``mu_i``.
    sigma, xi : (N*m,) arrays
        Cell-major base point and slope, with ``Xi_i = mu_i lam_i D^T D Sigma_i``.

    Returns
    -------
    QuadraticSubderivative
        ``extra["lam"]`` holds the recovered per-cell multipliers.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    mu = np.asarray(weights, dtype=float)
    N = mu.size
    m = D.shape[1]
    S = np.asarray(sigma, dtype=float).reshape(N, m)
    X = np.asarray(xi, dtype=float).reshape(N, m)
    DtD = D.T @ D
    lam = np.zeros(N)
    eq, ineq = [], []
    dim = N * m
    xscale = 1.0 + np.abs(X).max(initial=0.0)
    for i in range(N):
        norm = np.linalg.norm(D @ S[i])
        if norm > 1.0 + tol:
            raise NotNormal(f"cell {i} violates |D Sigma_i| <= 1")
        if norm < 1.0 - tol:
            if np.abs(X[i]).max() > 1e-7 * xscale:
                raise NotNormal(f"slope is nonzero on inactive cell {i}")
            continue
        a = DtD @ S[i]
        lam[i] = float(X[i] @ a) / (mu[i] * float(a @ a))
        if lam[i] < -tol or np.abs(X[i] - mu[i] * lam[i] * a).max() > 1e-7 * xscale:
            raise NotNormal(f"slope on cell {i} is not a nonnegative multiple of D^T D Sigma_i")
        lam[i] = max(lam[i], 0.0)
        row = np.zeros(dim)
        row[i * m:(i + 1) * m] = a
        if lam[i] > tol:
            eq.append(row)
        else:
            ineq.append(row)
    H = np.zeros((dim, dim))
    for i in range(N):
        H[i * m:(i + 1) * m, i * m:(i + 1) * m] = mu[i] * lam[i] * DtD
    cone = PolyhedralCone(dim, eq, ineq)
    return QuadraticSubderivative(cone, H, S.ravel(), X.ravel(), label="elastoplastic",
                                  extra={"lam": lam})


def q_ball_complement(radius, x, g, tol=TAU_ACT):
    """Second subderivative of the indicator of ``{|x| >= radius}``.

    At a boundary point the proximal normals are ``-s x`` with ``s >= 0``.
    For ``s > 0`` the cone is ``x^perp`` and the sphere's curvature gives
    ``Q(z) = -(|g| / radius) |z|^2``; for ``g = 0`` the cone is the tangent
    half-space and ``Q = 0``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    n = x.size
    nx = np.linalg.norm(x)
    gn = np.linalg.norm(g)
    if nx < radius * (1.0 - tol):
        raise NotNormal("base point lies inside the excluded ball")
    if nx > radius * (1.0 + tol):
        if gn > tol:
            raise NotNormal("slope must vanish at interior points of the set")
        return QuadraticSubderivative(PolyhedralCone(n), np.zeros((n, n)), x, g,
                                      label="ball_complement")
    u = x / nx
    if gn <= tol:
        return QuadraticSubderivative(PolyhedralCone(n, ineq=[-u]), np.zeros((n, n)), x, g,
                                      label="ball_complement")
    s = -float(g @ u)
    if s <= 0 or np.linalg.norm(g + s * u) > 1e-7 * (1.0 + gn):
        raise NotNormal("slope is not an inward radial direction")
    H = -(gn / radius) * np.eye(n)
    return QuadraticSubderivative(PolyhedralCone(n, eq=[u]), H, x, g, label="ball_complement")


def q_prox_regular_shift(q_delta):
    """``Q_j(z) = |z|^2 + Q_delta(z)`` for ``j = 1/2 |.|^2 + delta_K``.

    The slope of the result is ``g + x`` where ``g`` is the slope of
    ``q_delta``.
    """
    n = q_delta.hessian.shape[0]
    return QuadraticSubderivative(q_delta.cone, q_delta.hessian + np.eye(n),
                                  q_delta.base_point, q_delta.slope + q_delta.base_point,
                                  label="prox_regular_shift")


def catalog_subderivative(functional, x, g):
    """Dispatch to the closed-form entry matching a built-in functional."""
    if isinstance(functional, (Box, Polyhedron)):
        return q_polyhedric(functional, None, x, g)
    if isinstance(functional, ScaledL1):
        return q_one_norm(functional.weights, x, g)
    if isinstance(functional, BallComplement):
        return q_ball_complement(functional.radius, x, g)
    if isinstance(functional, HalfSquaredNormPlus) and isinstance(functional.inner, BallComplement):
        qd = q_ball_complement(functional.inner.radius, x, np.asarray(g) - np.asarray(x))
        return q_prox_regular_shift(qd)
    if functional.kind == "indicator_pointwise_ball":
        return q_elastoplastic(functional.D, np.ones(functional.cells), x, g)
    raise NotImplementedError(f"no catalog entry for {type(functional).__name__}")


DEFAULT_ORACLE_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


def _ball_points(k, dim, seed):
    """``k`` scrambled Sobol points mapped into the unit ball."""
    sob = qmc.Sobol(d=dim + 1, scramble=True, seed=seed)
    U = sob.random(k)
    G = ndtri(np.clip(U[:, :dim], 1e-12, 1 - 1e-12))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    r = U[:, dim] ** (1.0 / dim)
    return G * r[:, None]


def q_bruteforce_oracle(functional, x, g, z, t_grid=DEFAULT_ORACLE_GRID,
                        neighborhood_radius=1.0, samples=4096, seed=0, refine=200):
    """Direct numerical evaluation of the second subderivative.

    For each ``t`` the second-order quotient
    ``(j(x + t z') - j(x) - t <g, z'>) / (t^2 / 2)`` is minimized over
    candidates ``z'`` near ``z``. Candidates come from quasi-random points in
    a ball of radius ``t (1 + |z|)`` around ``z``, mapped into ``dom(j)`` by
    the functional's ``restore`` map, and are kept only when
    ``|z' - z| <= sqrt(t) (1 + |z|) * neighborhood_radius``. A short random
    local search refines the minimizer. The limit ``t -> 0`` is estimated by
    a linear fit in ``t`` through the three smallest step sizes.

    Returns ``inf`` when no finite quotient is found, when the quotients keep
    growing like ``1/t``, or when the extrapolated value exceeds ``1e6``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=float)
    dim = x.size
    rng = np.random.default_rng(seed)
    base = _ball_points(samples, dim, seed)
    jx = functional(x)
    zn = 1.0 + np.linalg.norm(z)
    ts = sorted(t_grid, reverse=True)
    values = []

    def quotients(Zc, t):
        vals = functional.evaluate_rows(x + t * Zc)
        return (vals - jx - t * (Zc @ g)) / (0.5 * t * t)

    for t in ts:
        W = np.vstack([z, z + t * zn * base])
        Zc = (functional.restore(x + t * W) - x) / t
        keep = np.linalg.norm(Zc - z, axis=1) <= np.sqrt(t) * zn * neighborhood_radius
        if not np.any(keep):
            values.append(INF)
            continue
        Zc = Zc[keep]
        q = quotients(Zc, t)
        best = int(np.argmin(q))
        bz, bq = Zc[best], q[best]
        if np.isfinite(bq):
            step = t * zn
            for _ in range(refine):
                W = bz + step * _random_ball(rng, 16, dim)
                W = z + _clip_radius(W - z, t * zn)
                Zr = (functional.restore(x + t * W) - x) / t
                ok = np.linalg.norm(Zr - z, axis=1) <= np.sqrt(t) * zn * neighborhood_radius
                if np.any(ok):
                    qr = quotients(Zr[ok], t)
                    k = int(np.argmin(qr))
                    if qr[k] < bq:
                        bz, bq = Zr[ok][k], qr[k]
                        continue
                step *= 0.7
                if step < 1e-6 * t * zn:
                    break
        values.append(float(bq))

    v = np.array(values)
    finite = np.isfinite(v)
    if not finite.any():
        return INF
    if not finite[-1]:
        return INF
    if abs(v[-1]) > 1e6:
        return INF if v[-1] > 0 else -INF
    tail = v[-3:]
    if np.all(np.isfinite(tail)) and np.all(tail > 0):
        ratios = tail[1:] / tail[:-1]
        if np.all(ratios >= 5.0):
            return INF
    idx = np.flatnonzero(finite)[-3:]
    tt = np.array(ts)[idx]
    if idx.size >= 2:
        coef = np.polyfit(tt, v[idx], 1)
        est = float(coef[1])
    else:
        est = float(v[idx[-1]])
    return INF if est > 1e6 else est


def _random_ball(rng, k, dim):
    G = rng.standard_normal((k, dim))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return G * rng.random((k, 1)) ** (1.0 / dim)


def _clip_radius(W, r):
    n = np.linalg.norm(W, axis=1, keepdims=True)
    return W * np.minimum(1.0, r / np.maximum(n, 1e-300))
