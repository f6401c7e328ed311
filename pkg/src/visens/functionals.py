"""Nonsmooth functionals ``j`` with exact proximal maps.

Every functional evaluates ``j(x)`` (``inf`` outside its domain) and provides
``prox(v, sigma) = argmin_z sigma*j(z) + 1/2 |z - v|^2``. Built-in kinds also
expose an element of the generalized Jacobian of the prox (for semismooth
Newton) and a vectorized ``restore`` map onto ``dom(j)`` used by the
brute-force subderivative oracle.
"""

from itertools import combinations
from math import comb

import numpy as np

from .qp import project_polyhedron

INF = float("inf")


class NonsmoothFunctional:
    kind = "custom"

    def __call__(self, x):
        raise NotImplementedError

    def prox(self, v, sigma):
        raise NotImplementedError

    def prox_jacobian(self, v, sigma):
        """An element of the Clarke Jacobian of ``prox(., sigma)`` at ``v``."""
        return None

    def restore(self, X):
        """Map rows of ``X`` to nearby points of ``dom(j)``; identity if finite."""
        return X

    def evaluate_rows(self, X):
        return np.array([self(x) for x in X])

    def describe(self):
        return {"kind": self.kind}


class Box(NonsmoothFunctional):
    """Indicator of ``{lower <= x <= upper}``."""

    kind = "indicator_box"

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("empty box")

    def __call__(self, x, tol=0.0):
        x = np.asarray(x)
        ok = np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        return 0.0 if ok else INF

    def evaluate_rows(self, X):
        ok = np.all((X >= self.lower) & (X <= self.upper), axis=1)
        return np.where(ok, 0.0, INF)

    def prox(self, v, sigma=1.0):
        return np.clip(v, self.lower, self.upper)

    def prox_jacobian(self, v, sigma=1.0):
        inside = (v > self.lower) & (v < self.upper)
        return np.diag(inside.astype(float))

    def restore(self, X):
        return np.clip(X, self.lower, self.upper)

    def describe(self):
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Polyhedron(NonsmoothFunctional):
    """Indicator of ``{G x <= h}``; ``feasible_point`` seeds the projection QP."""

    kind = "indicator_polyhedron"

    def __init__(self, G, h, feasible_point=None):
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.h = np.asarray(h, dtype=float).ravel()
        self.feasible_point = None if feasible_point is None else np.asarray(feasible_point, float)
        self._last_working = None
        self._faces = None

    def __call__(self, x, tol=1e-12):
        scale = 1.0 + np.abs(self.h).max()
        return 0.0 if np.all(self.G @ x - self.h <= tol * scale) else INF

    def evaluate_rows(self, X):
        scale = 1.0 + np.abs(self.h).max()
        ok = np.all(X @ self.G.T - self.h <= 1e-12 * scale, axis=1)
        return np.where(ok, 0.0, INF)

    def active(self, x, tol=1e-9):
        scale = 1.0 + np.abs(self.h).max()
        return np.abs(self.G @ x - self.h) <= tol * scale

    def restore(self, X):
        """Row-wise projection onto the polyhedron.

        For a handful of faces every face is tried: each row of ``X`` is
        projected onto the affine hull of each independent subset of rows and
        the closest feasible candidate is kept. Larger systems use the QP
        projection and then re-project onto the affine hull of its active
        face, which removes the QP's rounding drift off the constraints.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m, n = self.G.shape
        if sum(comb(m, r) for r in range(1, min(m, n) + 1)) > 64:
            return np.array([self._snap(x) for x in X])
        scale = 1.0 + np.abs(self.h).max()
        # rows already inside (up to rounding) are kept; the rest go to a face
        inside = np.all(X @ self.G.T - self.h <= 4e-16 * scale, axis=1)
        best = np.where(inside[:, None], X, np.nan)
        best_d = np.where(inside, 0.0, np.inf)
        todo = np.flatnonzero(~inside)
        if todo.size:
            A, b = self._face_projectors()
            # candidate projections onto every face hull: (faces, rows, n)
            P = np.matmul(X[todo][None], A) + b[:, None, :]
            ok = np.all(P @ self.G.T - self.h <= 1e-12 * scale, axis=2)
            d = np.where(ok, np.linalg.norm(P - X[todo][None], axis=2), np.inf)
            k = np.argmin(d, axis=0)
            dk = d[k, np.arange(todo.size)]
            found = np.isfinite(dk)
            best[todo[found]] = P[k[found], np.flatnonzero(found)]
            best_d[todo] = dk
        missing = ~np.isfinite(best_d)
        if np.any(missing):
            best[missing] = np.array([self._project(x).x for x in X[missing]])
        return best

    def _face_projectors(self):
        """Affine maps ``x -> x A + b`` projecting onto the hull of each face."""
        if self._faces is None:
            m, n = self.G.shape
            A, b = [], []
            for r in range(1, min(m, n) + 1):
                for S in combinations(range(m), r):
                    GS = self.G[list(S)]
                    if np.linalg.matrix_rank(GS) < r:
                        continue
                    # x - GS^T (GS GS^T)^{-1} (GS x - hS)
                    W = np.linalg.solve(GS @ GS.T, GS)
                    A.append(np.eye(n) - GS.T @ W)
                    b.append(W.T @ self.h[list(S)])
            self._faces = (np.array(A).reshape(-1, n, n), np.array(b).reshape(-1, n))
        return self._faces

    def _snap(self, x):
        scale = 1.0 + np.abs(self.h).max()
        if np.all(self.G @ x - self.h <= 4e-16 * scale):
            return x.copy()
        res = self._project(x)
        rows = np.flatnonzero(res.active)
        if rows.size == 0:
            return res.x
        GS = self.G[rows]
        C, *_ = np.linalg.lstsq(GS @ GS.T, GS @ x - self.h[rows], rcond=None)
        P = x - GS.T @ C
        ok = np.all(self.G @ P - self.h <= 1e-12 * scale)
        return P if ok and np.linalg.norm(P - res.x) <= 1e-9 * (1.0 + np.linalg.norm(x)) else res.x

    def _project(self, v):
        res = project_polyhedron(v, self.G, self.h, x0=self.feasible_point,
                                 working=self._last_working)
        self._last_working = np.flatnonzero(res.active)
        if self.feasible_point is None:
            # any projection is feasible; reusing it skips the phase-one LP
            self.feasible_point = res.x.copy()
        return res

    def prox(self, v, sigma=1.0):
        return self._project(v).x

    def prox_jacobian(self, v, sigma=1.0):
        res = self._project(v)
        rows = self.G[res.active & (res.ineq_multipliers > 0)]
        n = v.size
        if rows.shape[0] == 0:
            return np.eye(n)
        # projector onto the null space of the strictly active rows
        Q, R = np.linalg.qr(rows.T)
        rank = int(np.sum(np.abs(np.diag(R)) > 1e-12 * np.abs(R).max()))
        Q = Q[:, :rank]
        return np.eye(n) - Q @ Q.T

    def describe(self):
        return {"kind": self.kind, "G": self.G.tolist(), "h": self.h.tolist()}


class ScaledL1(NonsmoothFunctional):
    """``j(x) = sum_i w_i |x_i|`` with nonnegative weights."""

    kind = "one_norm_scaled"

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    def __call__(self, x):
        return float(np.sum(self.weights * np.abs(x)))

    def evaluate_rows(self, X):
        return np.abs(X) @ self.weights

    def prox(self, v, sigma=1.0):
        thr = sigma * self.weights
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)

    def prox_jacobian(self, v, sigma=1.0):
        return np.diag((np.abs(v) > sigma * self.weights).astype(float))

    def describe(self):
        return {"kind": self.kind, "weights": self.weights.tolist()}


def _cell_ball_projection(X, D):
    """Project each row of ``X`` onto ``{x : |D x| <= 1}``.

    Uses the SVD of ``D`` and a monotone Newton iteration on the secular
    equation ``|D (I + nu D^T D)^{-1} x0|^2 = 1``.
    """
    X = np.atleast_2d(X)
    _, s, Vt = np.linalg.svd(D, full_matrices=True)
    m = D.shape[1]
    sv = np.zeros(m)
    sv[: s.size] = s
    Y = X @ Vt.T
    s2 = sv**2
    norm2 = (Y**2) @ s2
    out = X.copy()
    outside = norm2 > 1.0
    if not np.any(outside):
        return out
    Yo = Y[outside]
    nu = np.zeros(Yo.shape[0])
    for _ in range(100):
        den = 1.0 + nu[:, None] * s2
        psi = np.sum(s2 * Yo**2 / den**2, axis=1) - 1.0
        dpsi = -2.0 * np.sum(s2**2 * Yo**2 / den**3, axis=1)
        step = psi / dpsi
        nu = nu - step
        if np.all(np.abs(psi) <= 1e-15):
            break
    Z = Yo / (1.0 + nu[:, None] * s2)
    out[outside] = Z @ Vt
    return out


class PointwiseBall(NonsmoothFunctional):
    """Indicator of ``{Sigma : |D Sigma_i| <= 1 for every cell i}``.

    ``Sigma`` is stored cell-major: ``Sigma.reshape(cells, m)``.
    """

    kind = "indicator_pointwise_ball"

    def __init__(self, D, cells):
        self.D = np.atleast_2d(np.asarray(D, dtype=float))
        self.cells = int(cells)
        self.m = self.D.shape[1]

    def cell_norms(self, x):
        S = np.asarray(x).reshape(self.cells, self.m)
        return np.linalg.norm(S @ self.D.T, axis=1)

    def __call__(self, x, tol=1e-12):
        return 0.0 if np.all(self.cell_norms(x) <= 1.0 + tol) else INF

    def evaluate_rows(self, X):
        S = X.reshape(X.shape[0], self.cells, self.m)
        norms = np.linalg.norm(S @ self.D.T, axis=2)
        return np.where(np.all(norms <= 1.0 + 1e-12, axis=1), 0.0, INF)

    def prox(self, v, sigma=1.0):
        S = np.asarray(v, dtype=float).reshape(self.cells, self.m)
        return _cell_ball_projection(S, self.D).ravel()

    def restore(self, X):
        k = X.shape[0]
        S = X.reshape(k * self.cells, self.m)
        return _cell_ball_projection(S, self.D).reshape(k, -1)

    def describe(self):
        return {"kind": self.kind, "D": self.D.tolist(), "cells": self.cells}


class BallComplement(NonsmoothFunctional):
    """Indicator of the nonconvex set ``{|x| >= radius}``."""

    kind = "indicator_halfspace_complement_ball"

    def __init__(self, radius=1.0):
        self.radius = float(radius)

    def __call__(self, x, tol=1e-12):
        return 0.0 if np.linalg.norm(x) >= self.radius * (1.0 - tol) else INF

    def evaluate_rows(self, X):
        return np.where(np.linalg.norm(X, axis=1) >= self.radius * (1.0 - 1e-12), 0.0, INF)

    def prox(self, v, sigma=1.0):
        nv = np.linalg.norm(v)
        if nv >= self.radius:
            return np.array(v, dtype=float)
        if nv == 0.0:
            raise ValueError("projection onto the ball complement is set-valued at 0")
        return self.radius * v / nv

    def prox_jacobian(self, v, sigma=1.0):
        nv = np.linalg.norm(v)
        if nv >= self.radius:
            return np.eye(v.size)
        u = v / nv
        return self.radius / nv * (np.eye(v.size) - np.outer(u, u))

    def restore(self, X):
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        scale = np.where(norms < self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        return X * scale

    def describe(self):
        return {"kind": self.kind, "radius": self.radius}


class HalfSquaredNormPlus(NonsmoothFunctional):
    """``j = 1/2 |x|^2 + inner`` for an indicator ``inner``."""

    kind = "custom"

    def __init__(self, inner):
        self.inner = inner

    def __call__(self, x):
        val = self.inner(x)
        return val if val == INF else val + 0.5 * float(np.dot(x, x))

    def evaluate_rows(self, X):
        return self.inner.evaluate_rows(X) + 0.5 * np.sum(X * X, axis=1)

    def prox(self, v, sigma=1.0):
        return self.inner.prox(np.asarray(v) / (1.0 + sigma), sigma / (1.0 + sigma))

    def prox_jacobian(self, v, sigma=1.0):
        J = self.inner.prox_jacobian(np.asarray(v) / (1.0 + sigma), sigma / (1.0 + sigma))
        return None if J is None else J / (1.0 + sigma)

    def restore(self, X):
        return self.inner.restore(X)

    def describe(self):
        return {"kind": self.kind, "form": "half_squared_norm_plus", "inner": self.inner.describe()}


class CustomFunctional(NonsmoothFunctional):
    """Wraps user callables; ``prox(v, sigma)`` must be exact for the solver guarantees."""

    kind = "custom"

    def __init__(self, func, prox, prox_jacobian=None, restore=None):
        self._func = func
        self._prox = prox
        self._jac = prox_jacobian
        self._restore = restore

    def __call__(self, x):
        return float(self._func(x))

    def prox(self, v, sigma=1.0):
        return np.asarray(self._prox(v, sigma), dtype=float)

    def prox_jacobian(self, v, sigma=1.0):
        return None if self._jac is None else self._jac(v, sigma)

    def restore(self, X):
        return X if self._restore is None else self._restore(X)


BUILTIN_KINDS = {
    "indicator_box": Box,
    "indicator_polyhedron": Polyhedron,
    "indicator_pointwise_ball": PointwiseBall,
    "one_norm_scaled": ScaledL1,
    "indicator_halfspace_complement_ball": BallComplement,
}


def from_config(cfg):
    """Build a functional from a JSON-style dict."""
    kind = cfg["kind"]
    if kind == "indicator_box":
        return Box(cfg["lower"], cfg["upper"])
    if kind == "indicator_polyhedron":
        return Polyhedron(cfg["G"], cfg["h"], cfg.get("feasible_point"))
    if kind == "one_norm_scaled":
        return ScaledL1(cfg["weights"])
    if kind == "indicator_pointwise_ball":
        return PointwiseBall(cfg["D"], cfg["cells"])
    if kind == "indicator_halfspace_complement_ball":
        return BallComplement(cfg.get("radius", 1.0))
    raise ValueError(f"unknown nonsmooth kind {kind!r}")
