"""Projections onto prox-regular sets and their differentiability checks.

A closed set ``K`` is ``r``-prox-regular when every proximal normal ``v`` at
``x_bar`` satisfies ``1/2 |v| |x - x_bar|^2 >= r <v, x - x_bar>`` for all
``x`` in ``K``. On the enlargement ``K_rho = {dist(., K) < rho}`` with
``rho < r`` the projection is single valued and Lipschitz with rank
``r / (r - rho)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import ViProblem
from .errors import OutsideEnlargement, SetValued
from .functionals import BallComplement, HalfSquaredNormPlus


@dataclass
class ConvexPiece:
    """A box ``[lower, upper]`` or a closed ball ``|x - center| <= radius``."""

    kind: str
    data: dict

    def project(self, p):
        if self.kind == "box":
            return np.clip(p, self.data["lower"], self.data["upper"])
        c = np.asarray(self.data["center"], dtype=float)
        d = p - c
        nd = np.linalg.norm(d)
        R = self.data["radius"]
        return p.copy() if nd <= R else c + R * d / nd

    def contains(self, x, tol=1e-12):
        return np.linalg.norm(self.project(x) - x) <= tol * (1.0 + np.linalg.norm(x))

    def sample(self, rng, k, dim):
        if self.kind == "box":
            lo = np.asarray(self.data["lower"], dtype=float)
            hi = np.asarray(self.data["upper"], dtype=float)
            return lo + (hi - lo) * rng.random((k, dim))
        G = rng.standard_normal((k, dim))
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        r = self.data["radius"] * rng.random((k, 1)) ** (1.0 / dim)
        return np.asarray(self.data["center"], dtype=float) + G * r


@dataclass
class ProxRegularSet:
    kind: str
    dim: int
    prox_constant: float
    radius: float = 1.0
    pieces: list = field(default_factory=list)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        if self.kind == "ball_complement":
            return np.linalg.norm(x) >= self.radius * (1.0 - tol)
        return any(piece.contains(x, tol) for piece in self.pieces)

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "ball_complement":
            return max(self.radius - np.linalg.norm(p), 0.0)
        return min(np.linalg.norm(piece.project(p) - p) for piece in self.pieces)

    def sample_points(self, rng, k):
        """Points of ``K`` concentrated near its boundary."""
        if self.kind == "ball_complement":
            G = rng.standard_normal((k, self.dim))
            G /= np.linalg.norm(G, axis=1, keepdims=True)
            r = self.radius + rng.exponential(0.5, size=(k, 1)) * (rng.random((k, 1)) < 0.8)
            return G * r
        idx = rng.integers(0, len(self.pieces), size=k)
        out = np.empty((k, self.dim))
        for a, piece in enumerate(self.pieces):
            sel = idx == a
            out[sel] = piece.sample(rng, int(sel.sum()), self.dim)
        return out


def ball_complement(radius=1.0, dim=2):
    """``K = {|x| >= radius}``, which is ``radius``-prox-regular."""
    return ProxRegularSet("ball_complement", dim, float(radius), float(radius))


def union_of_convex(pieces, prox_constant, dim):
    """Finite union of boxes and balls with a declared prox-regularity constant."""
    return ProxRegularSet("union_of_convex", dim, float(prox_constant),
                          pieces=[ConvexPiece(k, d) for k, d in pieces])


def convex_set(kind, data, dim):
    return ProxRegularSet("convex", dim, float("inf"), pieces=[ConvexPiece(kind, data)])


def project(K, p):
    """Nearest point of ``K`` to ``p``.

    Raises
    ------
    SetValued
        When ``p`` has several nearest points (``p = 0`` for the ball
        complement, or ties between members of a union).
    OutsideEnlargement
        When ``dist(p, K) >= r``.
    """
    p = np.asarray(p, dtype=float)
    if K.kind == "ball_complement":
        n = np.linalg.norm(p)
        if n == 0.0:
            raise SetValued("every point of the sphere is nearest to the origin")
        if K.radius - n >= K.prox_constant:
            raise OutsideEnlargement("point is outside the enlargement K_r")
        return p.copy() if n >= K.radius else K.radius * p / n
    cands = [piece.project(p) for piece in K.pieces]
    dists = np.array([np.linalg.norm(c - p) for c in cands])
    best = int(np.argmin(dists))
    if dists[best] >= K.prox_constant:
        raise OutsideEnlargement("point is outside the enlargement K_r")
    ties = [c for c, d in zip(cands, dists)
            if d - dists[best] <= 1e-12 and np.linalg.norm(c - cands[best]) > 1e-12]
    if ties:
        raise SetValued("several members of the union attain the distance")
    return cands[best]


def _pairs_in_enlargement(K, rho, count, rng):
    """Pairs of points of ``K_rho``; half are close pairs near the inner rim."""
    X = K.sample_points(rng, count)
    if K.kind == "ball_complement":
        u = X / np.linalg.norm(X, axis=1, keepdims=True)
        depth = rho * (1.0 - rng.random((count, 1)) ** 4) * 0.999999
        P1 = u * (K.radius - depth)
        P1[::2] = X[::2] - u[::2] * (rho * rng.random((count, 1))[::2] * 0.999999)
    else:
        D = rng.standard_normal((count, K.dim))
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        P1 = X + D * rho * rng.random((count, 1)) * 0.999999
    step = rng.standard_normal((count, K.dim))
    scale = np.where(rng.random(count) < 0.5, 1e-3, 0.3)[:, None]
    P2 = P1 + scale * step
    keep = np.array([K.distance(p) < rho for p in P2])
    return P1[keep], P2[keep]


def lipschitz_probe(K, rho, pairs=10_000, seed=0):
    """Largest observed ``|proj(p1) - proj(p2)| / |p1 - p2|`` over pairs in ``K_rho``."""
    rng = np.random.default_rng(seed)
    P1, P2 = _pairs_in_enlargement(K, rho, pairs, rng)
    best = 0.0
    for p1, p2 in zip(P1, P2):
        d = np.linalg.norm(p1 - p2)
        if d == 0.0:
            continue
        best = max(best, np.linalg.norm(project(K, p1) - project(K, p2)) / d)
    return best


def prox_regularity_check(K, triples=10_000, seed=0):
    """Smallest value of ``1/2 |v| |x - x_bar|^2 - r <v, x - x_bar>`` on sampled triples.

    Proximal normals are produced as ``v = p - proj(p)`` for points ``p`` near
    ``K``; for the convex case (``r = inf``) the check reduces to
    ``<v, x - x_bar> <= 0`` and the returned value is ``-max <v, x - x_bar>``.
    """
    rng = np.random.default_rng(seed)
    r = K.prox_constant
    X = K.sample_points(rng, triples)
    rim = K.sample_points(rng, triples)
    worst = np.inf
    for p_base, x in zip(rim, X):
        if K.kind == "ball_complement":
            u = p_base / np.linalg.norm(p_base)
            p = u * K.radius * rng.uniform(0.05, 1.0)
        else:
            p = p_base + rng.standard_normal(K.dim) * min(r, 2.0) * 0.5
            if K.distance(p) >= r:
                continue
        try:
            xb = project(K, p)
        except (SetValued, OutsideEnlargement):
            continue
        v = p - xb
        d = x - xb
        if np.isinf(r):
            val = -float(v @ d)
        else:
            val = 0.5 * np.linalg.norm(v) * float(d @ d) - r * float(v @ d)
            val /= 1.0 + np.linalg.norm(v) * (1.0 + float(d @ d))
        worst = min(worst, val)
    return worst


def recast_inequality_check(K, rho, samples=10_000, seed=0):
    """Smallest value of ``|x-p|^2 - (1-rho/r)|x-x_bar|^2 - |p-x_bar|^2`` (relative)."""
    rng = np.random.default_rng(seed)
    P, _ = _pairs_in_enlargement(K, rho, samples, rng)
    X = K.sample_points(rng, P.shape[0])
    factor = 1.0 - (rho / K.prox_constant if np.isfinite(K.prox_constant) else 0.0)
    worst = np.inf
    for p, x in zip(P, X):
        xb = project(K, p)
        val = float((x - p) @ (x - p)) - factor * float((x - xb) @ (x - xb)) - float((p - xb) @ (p - xb))
        worst = min(worst, val / (1.0 + float((x - p) @ (x - p))))
    return worst


SEGMENT_T_GRID = (1e-2, 1e-3, 1e-4, 1e-5)


def directional_quotients(K, p, q, t_grid=SEGMENT_T_GRID):
    base = project(K, p)
    return [(project(K, p + t * q) - base) / t for t in t_grid]


def _extrapolate(quots, t_grid):
    # linear extrapolation to t = 0 through the two smallest step sizes
    t1, t2 = t_grid[-2], t_grid[-1]
    return quots[-1] + (quots[-1] - quots[-2]) * t2 / (t1 - t2)


def _stabilizes(quots, floor):
    diffs = [np.linalg.norm(quots[k + 1] - quots[k]) for k in range(len(quots) - 1)]
    for a, b in zip(diffs, diffs[1:]):
        if b <= floor:
            continue
        if b > a / 2.0:
            return False
    return True


def segment_differentiability_check(K, x_bar, v, rho_list, directions=8, seed=0,
                                    t_grid=SEGMENT_T_GRID):
    """Finite-difference differentiability verdict at ``x_bar + rho v`` per ``rho``.

    A point is judged differentiable when, for every seeded direction ``q``,
    the quotients at ``t = 1e-2 ... 1e-5`` have successive differences that
    shrink by a factor of at least two (or sit at rounding level), and the
    extrapolated limit is linear in ``q``: ``D(-q) = -D(q)`` and
    ``D(q1 + q2) = D(q1) + D(q2)``.
    """
    rng = np.random.default_rng(seed)
    x_bar = np.asarray(x_bar, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    Qs = rng.standard_normal((directions, x_bar.size))
    per_rho = []
    for rho in rho_list:
        p = x_bar + rho * v
        floor = 1e-9
        stable = True
        limits = []
        for q in Qs:
            qs = directional_quotients(K, p, q, t_grid)
            stable &= _stabilizes(qs, floor)
            limits.append(_extrapolate(qs, t_grid))
        lin_gap = 0.0
        for a in range(directions):
            q = Qs[a]
            neg = _extrapolate(directional_quotients(K, p, -q, t_grid), t_grid)
            lin_gap = max(lin_gap, np.linalg.norm(neg + limits[a]))
            b = (a + 1) % directions
            s = _extrapolate(directional_quotients(K, p, q + Qs[b], t_grid), t_grid)
            lin_gap = max(lin_gap, np.linalg.norm(s - limits[a] - limits[b]))
        linear = lin_gap <= 1e-4 * (1.0 + max(np.linalg.norm(l) for l in limits))
        per_rho.append({"rho": float(rho), "differentiable": bool(stable and linear),
                        "stable": bool(stable), "linearity_gap": float(lin_gap)})
    verdicts = [r["differentiable"] for r in per_rho]
    return {"per_rho": per_rho, "agree": len(set(verdicts)) <= 1,
            "differentiable": bool(all(verdicts))}


def projection_vi(K, rho):
    """The VI whose solution at ``p`` is ``proj_K(p)`` for ``p`` in ``K_rho``.

    ``A(p, x) = (1 - rho/r)(x - p) - p`` and ``j = 1/2 |x|^2 + delta_K``.
    Only the ball complement is supported.
    """
    if K.kind != "ball_complement":
        raise NotImplementedError("projection VI is provided for the ball complement")
    n = K.dim
    a = 1.0 - rho / K.prox_constant

    def A(p, x):
        return a * (x - p) - p

    return ViProblem(n, n, A, lambda p, x: a * np.eye(n), lambda p, x: -(1.0 + a) * np.eye(n),
                     HalfSquaredNormPlus(BallComplement(K.radius)), a, lipschitz_bound=a,
                     name="prox-regular-projection")
