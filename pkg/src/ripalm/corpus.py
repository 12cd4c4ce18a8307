"""Small test problems paired with exact reference solutions.

Each entry is a problem-file dictionary (so the corpus also exercises the
file schema) plus an oracle solution whose multipliers are arranged the way
the solver sees the constraints: equality multipliers, then one multiplier
per inequality row. Bounds encoded in the prox term carry no multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import oracles
from .oracles import OracleSolution
from .problem import ConvexProgram
from .problem_file import program_from_dict


@dataclass(frozen=True)
class CorpusProblem:
    name: str
    doc: dict
    oracle: OracleSolution
    x0: np.ndarray

    @property
    def program(self) -> ConvexProgram:
        return program_from_dict(self.doc)[0]


def _lst(a):
    return np.asarray(a, dtype=float).tolist()


def _eqqp_2d():
    doc = {"n": 2, "objective": {"kind": "quadratic", "Q": _lst(np.eye(2)), "c": [0.0, 0.0]},
           "equality": {"A": [[1.0, 1.0]], "b": [2.0]}}
    sol = oracles.solve_equality_qp(np.eye(2), np.zeros(2), [[1.0, 1.0]], [2.0])
    return doc, sol, np.zeros(2)


def _eqqp_random():
    rng = np.random.default_rng(0)
    n, m = 6, 3
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + 0.5 * np.eye(n)
    c = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    doc = {"n": n, "objective": {"kind": "quadratic", "Q": _lst(Q), "c": _lst(c)},
           "equality": {"A": _lst(A), "b": _lst(b)}}
    return doc, oracles.solve_equality_qp(Q, c, A, b), np.zeros(n)


def _lsq_eq():
    rng = np.random.default_rng(1)
    n = 5
    M = rng.standard_normal((8, n))
    d = rng.standard_normal(8)
    A = rng.standard_normal((2, n))
    b = rng.standard_normal(2)
    doc = {"n": n, "objective": {"kind": "least_squares", "M": _lst(M), "d": _lst(d)},
           "equality": {"A": _lst(A), "b": _lst(b)}}
    sol = oracles.solve_equality_qp(M.T @ M, -M.T @ d, A, b)
    sol = OracleSolution(sol.x_star, sol.lambda_star, sol.mu_star, sol.obj_star + 0.5 * d @ d)
    return doc, sol, np.zeros(n)


def _halfspace():
    d = np.array([2.0, 0.0])
    doc = {"n": 2, "objective": {"kind": "least_squares", "M": _lst(np.eye(2)), "d": _lst(d)},
           "inequalities": [{"kind": "affine", "G": [[1.0, 0.0]], "h": [1.0]}]}
    sol = oracles.solve_inequality_qp_bruteforce(np.eye(2), -d, [[1.0, 0.0]], [1.0])
    sol = OracleSolution(sol.x_star, sol.lambda_star, sol.mu_star, sol.obj_star + 0.5 * d @ d)
    return doc, sol, np.zeros(2)


def _ineq_affine():
    rng = np.random.default_rng(2)
    n = 5
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + np.eye(n)
    c = rng.standard_normal(n)
    G = rng.standard_normal((4, n))
    x_unc = np.linalg.solve(Q, -c)
    # two rows cut off the unconstrained minimizer, two are slack there
    h = G @ x_unc + np.array([-0.5, -0.3, 0.4, 0.8])
    doc = {"n": n, "objective": {"kind": "quadratic", "Q": _lst(Q), "c": _lst(c)},
           "inequalities": [{"kind": "affine", "G": _lst(G), "h": _lst(h)}]}
    return doc, oracles.solve_inequality_qp_bruteforce(Q, c, G, h), np.zeros(n)


def _qcqp_disk():
    z = np.array([2.0, 1.0])
    doc = {"n": 2, "objective": {"kind": "least_squares", "M": _lst(np.eye(2)), "d": _lst(z)},
           "inequalities": [{"kind": "quadratic",
                             "rows": [{"Q": _lst(2 * np.eye(2)), "q": [0.0, 0.0], "c": -1.0}]}]}
    sol = oracles.solve_single_qcqp(np.eye(2), -z, 2 * np.eye(2), np.zeros(2), -1.0)
    sol = OracleSolution(sol.x_star, sol.lambda_star, sol.mu_star, sol.obj_star + 0.5 * z @ z)
    return doc, sol, np.zeros(2)


def _qcqp_ellipse():
    Q = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 1.5]])
    c = np.array([-3.0, 1.0, -2.0])
    P = np.diag([2.0, 0.5, 1.0])
    q = np.array([0.1, 0.0, -0.2])
    r = -0.5
    doc = {"n": 3, "objective": {"kind": "quadratic", "Q": _lst(Q), "c": _lst(c)},
           "inequalities": [{"kind": "quadratic", "rows": [{"Q": _lst(P), "q": _lst(q), "c": r}]}]}
    return doc, oracles.solve_single_qcqp(Q, c, P, q, r), np.ones(3)


def _l1_eq():
    z = np.array([1.5, -0.2, 0.4, -1.0])
    w = 0.5
    A = np.ones((1, 4))
    doc = {"n": 4, "objective": {"kind": "least_squares", "M": _lst(np.eye(4)), "d": _lst(z)},
           "prox": {"kind": "l1", "weight": w},
           "equality": {"A": _lst(A), "b": [1.0]}}
    sol = oracles.solve_l1_qp_bruteforce(np.eye(4), -z, w, A, [1.0])
    sol = OracleSolution(sol.x_star, sol.lambda_star, sol.mu_star, sol.obj_star + 0.5 * z @ z)
    return doc, sol, np.zeros(4)


def _l1_lsq_eq():
    rng = np.random.default_rng(3)
    n = 5
    M = rng.standard_normal((7, n))
    d = rng.standard_normal(7)
    w = 0.3
    A = rng.standard_normal((1, n))
    b = np.array([0.5])
    doc = {"n": n, "objective": {"kind": "least_squares", "M": _lst(M), "d": _lst(d)},
           "prox": {"kind": "l1", "weight": w},
           "equality": {"A": _lst(A), "b": _lst(b)}}
    sol = oracles.solve_l1_qp_bruteforce(M.T @ M, -M.T @ d, w, A, b)
    sol = OracleSolution(sol.x_star, sol.lambda_star, sol.mu_star, sol.obj_star + 0.5 * d @ d)
    return doc, sol, np.zeros(n)


def _box_halfspace():
    z = np.array([1.2, 0.8, -0.3])
    a = np.array([[1.0, 1.0, 1.0]])
    doc = {"n": 3, "objective": {"kind": "least_squares", "M": _lst(np.eye(3)), "d": _lst(z)},
           "prox": {"kind": "box", "lo": 0.0, "hi": 1.0},
           "inequalities": [{"kind": "affine", "G": _lst(a), "h": [1.5]}]}
    G = np.vstack([a, np.eye(3), -np.eye(3)])
    h = np.array([1.5, 1, 1, 1, 0, 0, 0], dtype=float)
    full = oracles.solve_inequality_qp_bruteforce(np.eye(3), -z, G, h)
    # active bound rows hold only to rounding; keep x* inside dom f
    x = np.clip(full.x_star, 0.0, 1.0)
    sol = OracleSolution(x, np.zeros(0), full.mu_star[:1], full.obj_star + 0.5 * z @ z)
    return doc, sol, np.zeros(3)


def _simplex_qp():
    rng = np.random.default_rng(4)
    n = 4
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + 0.2 * np.eye(n)
    c = rng.standard_normal(n)
    A = np.ones((1, n))
    doc = {"n": n, "objective": {"kind": "quadratic", "Q": _lst(Q), "c": _lst(c)},
           "prox": {"kind": "nonneg"},
           "equality": {"A": _lst(A), "b": [1.0]}}
    full = oracles.solve_inequality_qp_bruteforce(Q, c, -np.eye(n), np.zeros(n), A, [1.0])
    sol = OracleSolution(np.maximum(full.x_star, 0.0), full.lambda_star, np.zeros(0), full.obj_star)
    return doc, sol, np.zeros(n)


_BUILDERS = {
    "eqqp_2d": _eqqp_2d,
    "eqqp_random": _eqqp_random,
    "lsq_eq": _lsq_eq,
    "halfspace": _halfspace,
    "ineq_affine": _ineq_affine,
    "qcqp_disk": _qcqp_disk,
    "qcqp_ellipse": _qcqp_ellipse,
    "l1_eq": _l1_eq,
    "l1_lsq_eq": _l1_lsq_eq,
    "box_halfspace": _box_halfspace,
    "simplex_qp": _simplex_qp,
}

NAMES = tuple(_BUILDERS)


@lru_cache(maxsize=None)
def get(name: str) -> CorpusProblem:
    doc, sol, x0 = _BUILDERS[name]()
    doc = dict(doc, name=name)
    return CorpusProblem(name, doc, sol, np.asarray(x0, dtype=float))


def all_problems() -> list[CorpusProblem]:
    return [get(n) for n in NAMES]
