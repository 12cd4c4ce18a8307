"""Exact reference solutions for small test problems.

These are correctness references, not solvers: dense KKT solves,
enumeration of active sets or sign patterns, and a one-dimensional
multiplier search for a single quadratic constraint.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

Array = np.ndarray

KKT_TOL = 1e-10


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    x_star: Array
    lambda_star: Array
    mu_star: Array
    obj_star: float

    @property
    def y_star(self) -> Array:
        return np.concatenate([self.lambda_star, self.mu_star])


def _empty(A, b, n):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    return np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n), np.asarray(b, dtype=float).ravel()


def _kkt_solve(Q, c, A, b):
    n = Q.shape[0]
    m = A.shape[0]
    K = np.block([[Q, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([-c, b])
    with warnings.catch_warnings():
        # singular subsets are expected during enumeration and rejected below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(K, check_finite=True)
    if np.min(np.abs(np.diag(lu))) <= 1e-13 * max(1.0, np.max(np.abs(np.diag(lu)))):
        raise OracleError("singular KKT matrix")
    sol = linalg.lu_solve((lu, piv), rhs)
    # one step of iterative refinement
    sol += linalg.lu_solve((lu, piv), rhs - K @ sol)
    return sol[:n], sol[n:]


def solve_equality_qp(Q, c, A=None, b=None) -> OracleSolution:
    """``min 0.5 x'Qx + c'x  s.t.  Ax = b`` via the KKT linear system."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    A, b = _empty(A, b, c.shape[0])
    x, lam = _kkt_solve(Q, c, A, b)
    return OracleSolution(x, lam, np.zeros(0), float(0.5 * x @ Q @ x + c @ x))


def solve_inequality_qp_bruteforce(Q, c, G, h, A=None, b=None, max_rows: int = 20) -> OracleSolution:
    """``min 0.5 x'Qx + c'x  s.t.  Gx <= h, Ax = b`` by active-set enumeration.

    Every subset of inequality rows is treated as active; candidates with a
    feasible primal point and nonnegative multipliers are kept and the one
    with the lowest objective is returned. ``Q`` must be positive definite.
    Subsets whose KKT system is singular (dependent active rows) are skipped.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    G, h = _empty(G, h, n)
    A, b = _empty(A, b, n)
    m2 = G.shape[0]
    if m2 > max_rows:
        raise ValueError(f"enumeration capped at {max_rows} inequality rows, got {m2}")
    if np.min(linalg.eigvalsh(0.5 * (Q + Q.T))) <= 0:
        raise ValueError("Q must be positive definite")

    best = None
    for r in range(m2 + 1):
        for active in itertools.combinations(range(m2), r):
            idx = list(active)
            Aact = np.vstack([A, G[idx]])
            bact = np.concatenate([b, h[idx]])
            try:
                x, mult = _kkt_solve(Q, c, Aact, bact)
            except OracleError:
                continue
            lam, mu_act = mult[: A.shape[0]], mult[A.shape[0]:]
            if np.any(mu_act < -KKT_TOL):
                continue
            if np.any(G @ x - h > KKT_TOL * (1.0 + np.abs(h))):
                continue
            obj = float(0.5 * x @ Q @ x + c @ x)
            if best is None or obj < best[0] - 1e-14 * (1 + abs(obj)):
                mu = np.zeros(m2)
                mu[idx] = np.maximum(mu_act, 0.0)
                best = (obj, x, lam, mu)
    if best is None:
        raise OracleError("no feasible KKT point among the enumerated active sets")
    obj, x, lam, mu = best
    return OracleSolution(x, lam, mu, obj)


def solve_l1_qp_bruteforce(Q, c, weight: float, A=None, b=None) -> OracleSolution:
    """``min 0.5 x'Qx + c'x + weight ||x||_1  s.t.  Ax = b`` by sign enumeration.

    Each coordinate is fixed to be positive, negative or zero; the resulting
    equality QP is solved and checked against the full optimality conditions.
    Exponential in ``n`` (3^n patterns), so only for tiny problems.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    A, b = _empty(A, b, n)
    m1 = A.shape[0]
    best = None
    for signs in itertools.product((1, -1, 0), repeat=n):
        s = np.array(signs, dtype=float)
        zero = s == 0
        # x_i = 0 on the zero set enforced as extra equality rows
        E = np.eye(n)[zero]
        Aaug = np.vstack([A, E])
        baug = np.concatenate([b, np.zeros(E.shape[0])])
        try:
            x, mult = _kkt_solve(Q, c + weight * s, Aaug, baug)
        except OracleError:
            continue
        if np.any(s * x < -KKT_TOL):
            continue
        lam = mult[:m1]
        resid = Q @ x + c + A.T @ lam
        nz = ~zero
        if np.any(np.abs(resid[nz] + weight * s[nz]) > 1e-8 * (1 + weight)):
            continue
        if np.any(np.abs(resid[zero]) > weight + 1e-9):
            continue
        obj = float(0.5 * x @ Q @ x + c @ x + weight * np.abs(x).sum())
        if best is None or obj < best[0]:
            best = (obj, x, lam)
    if best is None:
        raise OracleError("no sign pattern satisfied the optimality conditions")
    obj, x, lam = best
    return OracleSolution(x, lam, np.zeros(0), obj)


def solve_single_qcqp(Q, c, P, q, r) -> OracleSolution:
    """``min 0.5 x'Qx + c'x  s.t.  0.5 x'Px + q'x + r <= 0`` (Q PD, P PSD).

    The multiplier solves a scalar monotone equation, found by bracketing.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)

    def x_of(mu):
        return linalg.solve(Q + mu * P, -(c + mu * q), assume_a="sym")

    def g_of(mu):
        x = x_of(mu)
        return 0.5 * x @ P @ x + q @ x + r

    if g_of(0.0) <= 0:
        x = x_of(0.0)
        return OracleSolution(x, np.zeros(0), np.zeros(1), float(0.5 * x @ Q @ x + c @ x))
    hi = 1.0
    while g_of(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise OracleError("constraint appears infeasible")
    mu = optimize.brentq(g_of, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x = x_of(mu)
    return OracleSolution(x, np.zeros(0), np.array([mu]), float(0.5 * x @ Q @ x + c @ x))


def convex_qcqp_feasibility_residual(x, Qs, qs, cs) -> Array:
    """Values ``0.5 x'Q_i x + q_i'x + c_i`` of quadratic constraint rows."""
    x = np.asarray(x, dtype=float)
    return np.array([0.5 * x @ np.asarray(Q) @ x + np.asarray(q) @ x + c for Q, q, c in zip(Qs, qs, cs)])


def kkt_violation(grad_f, A, G_jac, g_vals, eq_resid, sol: OracleSolution, subgrad_slack=None) -> dict:
    """Stationarity, feasibility and complementarity residuals of a solution.

    ``subgrad_slack`` lets callers pass an element of the nonsmooth part's
    subdifferential that closes the stationarity equation.
    """
    stat = np.asarray(grad_f, dtype=float).copy()
    if sol.lambda_star.size:
        stat += np.asarray(A).T @ sol.lambda_star
    if sol.mu_star.size:
        stat += np.asarray(G_jac).T @ sol.mu_star
    if subgrad_slack is not None:
        stat += subgrad_slack
    g_vals = np.asarray(g_vals, dtype=float)
    return {
        "stationarity": float(np.linalg.norm(stat)),
        "feasibility": float(np.linalg.norm(np.concatenate([np.asarray(eq_resid, dtype=float), np.maximum(g_vals, 0.0)]))),
        "complementarity": float(np.max(np.abs(sol.mu_star * g_vals), initial=0.0)),
        "dual_sign": float(np.max(-sol.mu_star, initial=0.0)),
    }
