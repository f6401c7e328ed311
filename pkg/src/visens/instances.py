"""Seeded generators of elliptic VI instances with known solutions.

Each instance is built backwards: choose the solution ``x_bar`` and an
element ``a0`` of the subdifferential of ``j`` at ``x_bar`` (including
degenerate components with zero multiplier), then choose ``p0`` so that
``-A(p0, x_bar) = a0``. The state builders return ``(j, x_bar, a0)``.
"""

from dataclasses import dataclass

import numpy as np

from .core import ViProblem
from .functionals import Box, Polyhedron, ScaledL1


@dataclass
class GenericInstance:
    problem: ViProblem
    p0: np.ndarray
    q: np.ndarray
    x_bar: np.ndarray
    a0: np.ndarray
    seed: int
    kind: str
    symmetric: bool
    cubic: bool

    def describe(self):
        return {"seed": self.seed, "kind": self.kind, "dim": int(self.x_bar.size),
                "symmetric": self.symmetric, "cubic": self.cubic}


def _operator(M, beta, offset, N):
    def A(p, x):
        return M @ x + beta * x**3 + offset - N @ p

    def Ax(p, x):
        return M + np.diag(3.0 * beta * x**2)

    def Ap(p, x):
        return -N

    return A, Ax, Ap


def _box_state(rng, n):
    lower, upper = -np.ones(n), np.ones(n)
    x = np.empty(n)
    a0 = np.zeros(n)
    kinds = rng.integers(0, 5, size=n)
    # make sure each instance has at least one active and one degenerate component
    if n >= 3:
        kinds[:3] = rng.permutation([0, 1, 3])
    for i, k in enumerate(kinds):
        if k == 0:
            x[i] = rng.uniform(-0.8, 0.8)
        elif k in (1, 2):
            s = 1.0 if k == 1 else -1.0
            x[i] = s
            a0[i] = s * rng.uniform(0.5, 2.0)
        else:
            x[i] = 1.0 if k == 3 else -1.0
    return Box(lower, upper), x, a0


def _polyhedron_state(rng, n):
    m = n + 2
    G = rng.standard_normal((m, n))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    x = rng.uniform(-0.5, 0.5, size=n)
    k_act = int(rng.integers(1, n)) if n > 1 else 1
    active = rng.choice(m, size=k_act, replace=False)
    h = G @ x + rng.uniform(0.2, 1.0, size=m)
    h[active] = G[active] @ x
    lam = rng.uniform(0.5, 2.0, size=k_act)
    if k_act >= 2:
        lam[0] = 0.0
    a0 = G[active].T @ lam
    return Polyhedron(G, h, feasible_point=x), x, a0


def _l1_state(rng, n):
    w = rng.uniform(0.5, 1.5, size=n)
    x = np.zeros(n)
    a0 = np.zeros(n)
    kinds = rng.integers(0, 3, size=n)
    if n >= 3:
        kinds[:3] = rng.permutation([0, 1, 2])
    for i, k in enumerate(kinds):
        if k == 0:
            x[i] = rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 1.5)
            a0[i] = w[i] * np.sign(x[i])
        elif k == 1:
            a0[i] = rng.uniform(-0.7, 0.7) * w[i]
        else:
            a0[i] = rng.choice([-1.0, 1.0]) * w[i]
    return ScaledL1(w), x, a0


def make_generic_instance(seed, dim=None, kind=None, symmetric=None, cubic=None):
    """One seeded instance; unspecified options are drawn from the seed."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11)) if dim is None else int(dim)
    kind = ["box", "polyhedron", "l1"][int(rng.integers(0, 3))] if kind is None else kind
    symmetric = bool(rng.integers(0, 2)) if symmetric is None else bool(symmetric)
    cubic = bool(rng.random() < 0.3) if cubic is None else bool(cubic)

    Qm = np.linalg.qr(rng.standard_normal((n, n)))[0]
    M = Qm @ np.diag(rng.uniform(1.0, 3.0, size=n)) @ Qm.T
    if not symmetric:
        K = rng.standard_normal((n, n))
        M = M + 0.5 * (K - K.T)
    beta = 0.5 if cubic else 0.0
    offset = rng.standard_normal(n)
    N = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)

    if kind == "box":
        j, x_bar, slope = _box_state(rng, n)
    elif kind == "polyhedron":
        j, x_bar, slope = _polyhedron_state(rng, n)
    elif kind == "l1":
        j, x_bar, slope = _l1_state(rng, n)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    A, Ax, Ap = _operator(M, beta, offset, N)
    p0 = np.linalg.solve(N, M @ x_bar + beta * x_bar**3 + offset + slope)
    c = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    problem = ViProblem(n, n, A, Ax, Ap, j, c,
                        lipschitz_bound=None if cubic else float(np.linalg.norm(M, 2)),
                        name=f"generic-{kind}-{seed}")
    q = rng.standard_normal(n)
    return GenericInstance(problem, p0, q, x_bar, slope, seed, kind, symmetric, cubic)


def generic_suite(count=50, seed=0):
    """The seeded family used by the identity and finite-difference suites."""
    return [make_generic_instance(seed * 1000 + k) for k in range(count)]
