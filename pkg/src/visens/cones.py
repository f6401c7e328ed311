"""Closed convex cones used as reduced critical cones.

A :class:`PolyhedralCone` is ``{z : E z = 0, G z <= 0}``. Without inequality
rows it is a subspace and is reported as such. :class:`AtomCone` is the
coefficient space of Dirac atoms at a fixed finite set of points, so it is
all of ``R^k``.
"""

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .qp import solve_qp


def _rows(M, n):
    if M is None:
        return np.zeros((0, n))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return M.reshape(-1, n) if M.size else np.zeros((0, n))


class PolyhedralCone:
    def __init__(self, dim, eq=None, ineq=None):
        self.dim = int(dim)
        self.eq = _rows(eq, self.dim)
        self.ineq = _rows(ineq, self.dim)
        self._span = None

    @property
    def kind(self):
        return "subspace" if self.ineq.shape[0] == 0 else "polyhedral"

    def contains(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        scale = tol * (1.0 + np.linalg.norm(z))
        if self.eq.shape[0] and np.abs(self.eq @ z).max() > scale:
            return False
        if self.ineq.shape[0] and (self.ineq @ z).max() > scale:
            return False
        return True

    def contains_rows(self, Z, tol=1e-9):
        scale = tol * (1.0 + np.linalg.norm(Z, axis=1))
        ok = np.ones(Z.shape[0], dtype=bool)
        if self.eq.shape[0]:
            ok &= np.abs(Z @ self.eq.T).max(axis=1) <= scale
        if self.ineq.shape[0]:
            ok &= (Z @ self.ineq.T).max(axis=1) <= scale
        return ok

    def subspace_basis(self):
        """Orthonormal basis of the null space of the equality rows."""
        if self.eq.shape[0] == 0:
            return np.eye(self.dim)
        return null_space(self.eq, rcond=1e-10)

    def project(self, z):
        z = np.asarray(z, dtype=float)
        if self.ineq.shape[0] == 0:
            N = self.subspace_basis()
            return N @ (N.T @ z)
        res = solve_qp(np.eye(self.dim), -z, E=self.eq if self.eq.shape[0] else None,
                       G=self.ineq, h=np.zeros(self.ineq.shape[0]), x0=np.zeros(self.dim))
        return res.x

    def span_basis(self):
        """Orthonormal basis of the linear span of the cone.

        Inequality rows that vanish on the whole cone (implicit equalities)
        are detected by one LP per row.
        """
        if self._span is not None:
            return self._span
        implicit = []
        for i in range(self.ineq.shape[0]):
            res = linprog(self.ineq[i], A_ub=self.ineq, b_ub=np.zeros(self.ineq.shape[0]),
                          A_eq=self.eq if self.eq.shape[0] else None,
                          b_eq=np.zeros(self.eq.shape[0]) if self.eq.shape[0] else None,
                          bounds=[(-1.0, 1.0)] * self.dim, method="highs")
            if res.status == 0 and res.fun > -1e-10:
                implicit.append(self.ineq[i])
        rows = np.vstack([self.eq] + [np.atleast_2d(r) for r in implicit])
        self._span = np.eye(self.dim) if rows.shape[0] == 0 else null_space(rows, rcond=1e-10)
        return self._span

    def sample(self, rng, count):
        """Seeded points of the cone, including points on its faces.

        Each batch fixes a random subset of inequality rows as equalities,
        draws Gaussian points in the resulting subspace and keeps those that
        satisfy the remaining rows. Projection of Gaussian points fills any
        shortfall.
        """
        N = self.subspace_basis()
        if N.shape[1] == 0:
            return np.zeros((count, self.dim))
        if self.ineq.shape[0] == 0:
            return rng.standard_normal((count, N.shape[1])) @ N.T
        out = []
        have = 0
        m = self.ineq.shape[0]
        for _ in range(200):
            tight = rng.random(m) < 0.3
            rows = np.vstack([self.eq, self.ineq[tight]])
            Nf = null_space(rows, rcond=1e-10) if rows.shape[0] else np.eye(self.dim)
            if Nf.shape[1] == 0:
                continue
            Z = rng.standard_normal((count, Nf.shape[1])) @ Nf.T
            ok = self.contains_rows(Z, tol=1e-12)
            out.append(Z[ok])
            have += int(ok.sum())
            if have >= count:
                break
        Z = np.vstack(out) if out else np.zeros((0, self.dim))
        if Z.shape[0] < count:
            extra = [self.project(v) for v in rng.standard_normal((count - Z.shape[0], self.dim))]
            Z = np.vstack([Z, np.array(extra)])
        return Z[:count]

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "eq": self.eq.tolist(), "ineq": self.ineq.tolist()}


class AtomCone(PolyhedralCone):
    """Coefficients of Dirac atoms located at ``points``; the full space."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float).ravel()
        super().__init__(self.points.size)

    @property
    def kind(self):
        return "atoms_at_points"

    def describe(self):
        return {"kind": self.kind, "points": self.points.tolist()}
