"""Convex programs with a smooth + proximable objective, linear equalities and
smooth convex inequalities.

The objective is split as ``f = smooth + prox`` so that the proximal ALM
subproblem can be handled by a proximal gradient method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

Array = np.ndarray


def _as_vector(x, name: str = "x") -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {x.shape}")
    return x


def _check_dim(x: Array, n: int, name: str = "x") -> Array:
    x = _as_vector(x, name)
    if x.shape[0] != n:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {n}")
    return x


def operator_norm(mat) -> float:
    """Spectral norm for dense input, Frobenius upper bound for sparse."""
    if mat.shape[0] == 0 or mat.shape[1] == 0:
        return 0.0
    if sp.issparse(mat):
        return float(sp.linalg.norm(mat))
    return float(np.linalg.norm(mat, 2))


# --------------------------------------------------------------------------
# Smooth objective part
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothTerm:
    """Differentiable convex part of the objective.

    ``lipschitz_bound`` only seeds the inner step size; backtracking corrects
    an underestimate.
    """

    value_at: Callable[[Array], float]
    gradient_at: Callable[[Array], Array]
    lipschitz_bound: float = 1.0
    name: str = "smooth"


def zero_smooth() -> SmoothTerm:
    return SmoothTerm(
        value_at=lambda x: 0.0,
        gradient_at=lambda x: np.zeros_like(x),
        lipschitz_bound=0.0,
        name="zero",
    )


def quadratic(Q, c) -> SmoothTerm:
    """``0.5 x'Qx + c'x`` with ``Q`` symmetric positive semidefinite."""
    Q = np.asarray(Q, dtype=float)
    c = _as_vector(c, "c")
    if Q.shape != (c.shape[0], c.shape[0]):
        raise ValueError(f"Q has shape {Q.shape}, expected {(c.shape[0],) * 2}")
    Q = 0.5 * (Q + Q.T)

    def value(x):
        return float(0.5 * x @ (Q @ x) + c @ x)

    def grad(x):
        return Q @ x + c

    return SmoothTerm(value, grad, operator_norm(Q), name="quadratic")


def least_squares(M, d) -> SmoothTerm:
    """``0.5 ||Mx - d||^2``."""
    M = np.asarray(M, dtype=float)
    d = _as_vector(d, "d")
    if M.ndim != 2 or M.shape[0] != d.shape[0]:
        raise ValueError(f"M has shape {M.shape}, incompatible with d of length {d.shape[0]}")

    def value(x):
        r = M @ x - d
        return float(0.5 * r @ r)

    def grad(x):
        return M.T @ (M @ x - d)

    return SmoothTerm(value, grad, operator_norm(M) ** 2, name="least_squares")


# --------------------------------------------------------------------------
# Proximable objective part
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProxTerm:
    """Closed convex term accessed through its value and proximal map.

    ``prox_at(x, t)`` returns ``argmin_z value(z) + ||z - x||^2 / (2t)``.
    ``value_at`` may return ``inf`` outside the domain.
    """

    value_at: Callable[[Array], float]
    prox_at: Callable[[Array, float], Array]
    name: str = "none"


def no_prox() -> ProxTerm:
    return ProxTerm(lambda x: 0.0, lambda x, t: np.array(x, dtype=float), name="none")


def soft_threshold(x: Array, thresh) -> Array:
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def l1(weight: float = 1.0) -> ProxTerm:
    """``weight * ||x||_1``."""
    if weight < 0:
        raise ValueError("l1 weight must be nonnegative")

    def value(x):
        return float(weight * np.abs(x).sum())

    def prox(x, t):
        return soft_threshold(x, weight * t)

    return ProxTerm(value, prox, name="l1")


def nonneg_indicator() -> ProxTerm:
    def value(x):
        return 0.0 if np.all(x >= 0) else np.inf

    def prox(x, t):
        return np.maximum(x, 0.0)

    return ProxTerm(value, prox, name="nonneg")


def box_indicator(lo, hi) -> ProxTerm:
    """Indicator of ``{lo <= x <= hi}``; bounds may be scalars or vectors."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box bounds must satisfy lo <= hi")

    def value(x):
        return 0.0 if np.all((x >= lo) & (x <= hi)) else np.inf

    def prox(x, t):
        return np.clip(x, lo, hi)

    return ProxTerm(value, prox, name="box")


# --------------------------------------------------------------------------
# Constraints
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearEquality:
    """``A x = b``. ``A`` may be a dense array or a scipy sparse matrix."""

    matrix_a: object
    rhs_b: Array

    @property
    def m(self) -> int:
        return self.rhs_b.shape[0]

    def residual(self, x: Array) -> Array:
        if self.m == 0:
            return np.zeros(0)
        return np.asarray(self.matrix_a @ x).ravel() - self.rhs_b

    def adjoint(self, v: Array) -> Array:
        return np.asarray(self.matrix_a.T @ v).ravel()


def linear_equality(A, b) -> LinearEquality:
    b = _as_vector(b, "b")
    if not sp.issparse(A):
        A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise ValueError(f"A has shape {A.shape}, incompatible with b of length {b.shape[0]}")
    return LinearEquality(A, b)


def no_equality(n: int) -> LinearEquality:
    return LinearEquality(np.zeros((0, n)), np.zeros(0))


@dataclass(frozen=True)
class InequalityBlock:
    """``g(x) <= 0`` with ``g: R^n -> R^m`` convex and differentiable."""

    values_at: Callable[[Array], Array]
    jacobian_at: Callable[[Array], Array]
    m: int
    name: str = "ineq"


def no_inequalities(n: int) -> InequalityBlock:
    return InequalityBlock(
        lambda x: np.zeros(0), lambda x: np.zeros((0, n)), 0, name="none"
    )


def affine_rows(G, h) -> InequalityBlock:
    """Rows ``G x - h <= 0``."""
    G = np.asarray(G, dtype=float)
    h = _as_vector(h, "h")
    if G.ndim != 2 or G.shape[0] != h.shape[0]:
        raise ValueError(f"G has shape {G.shape}, incompatible with h of length {h.shape[0]}")
    return InequalityBlock(lambda x: G @ x - h, lambda x: G, h.shape[0], name="affine")


def quadratic_rows(Qs: Sequence, qs: Sequence, cs: Sequence) -> InequalityBlock:
    """Rows ``0.5 x'Q_i x + q_i'x + c_i <= 0`` with each ``Q_i`` PSD."""
    Qs = [0.5 * (np.asarray(Q, dtype=float) + np.asarray(Q, dtype=float).T) for Q in Qs]
    qs = [_as_vector(q, "q") for q in qs]
    cs = np.asarray(cs, dtype=float).ravel()
    if not (len(Qs) == len(qs) == cs.shape[0]):
        raise ValueError("quadratic rows need matching numbers of Q, q and c")

    def values(x):
        return np.array([0.5 * x @ (Q @ x) + q @ x + c for Q, q, c in zip(Qs, qs, cs)])

    def jac(x):
        n = x.shape[0]
        if not Qs:
            return np.zeros((0, n))
        return np.vstack([Q @ x + q for Q, q in zip(Qs, qs)])

    return InequalityBlock(values, jac, len(Qs), name="quadratic")


def stack_inequalities(n: int, blocks: Sequence[InequalityBlock]) -> InequalityBlock:
    blocks = [b for b in blocks if b.m > 0]
    if not blocks:
        return no_inequalities(n)
    if len(blocks) == 1:
        return blocks[0]

    def values(x):
        return np.concatenate([b.values_at(x) for b in blocks])

    def jac(x):
        return np.vstack([b.jacobian_at(x) for b in blocks])

    return InequalityBlock(values, jac, sum(b.m for b in blocks), name="stacked")


# --------------------------------------------------------------------------
# The program
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexProgram:
    """``min smooth(x) + prox(x)  s.t.  A x = b,  g(x) <= 0``."""

    smooth: SmoothTerm
    prox: ProxTerm
    equality: LinearEquality
    inequality: InequalityBlock
    dim_n: int

    def __post_init__(self):
        if self.dim_n < 1:
            raise ValueError("dim_n must be positive")
        if self.equality.matrix_a.shape[1] != self.dim_n:
            raise ValueError(
                f"A has {self.equality.matrix_a.shape[1]} columns, expected {self.dim_n}"
            )

    @property
    def m1(self) -> int:
        return self.equality.m

    @property
    def m2(self) -> int:
        return self.inequality.m

    def check(self, x) -> Array:
        return _check_dim(x, self.dim_n)

    def g(self, x: Array) -> Array:
        if self.m2 == 0:
            return np.zeros(0)
        return np.asarray(self.inequality.values_at(x), dtype=float)

    def jacobian(self, x: Array) -> Array:
        if self.m2 == 0:
            return np.zeros((0, self.dim_n))
        return np.asarray(self.inequality.jacobian_at(x), dtype=float)


def make_program(
    n: int,
    smooth: SmoothTerm | None = None,
    prox: ProxTerm | None = None,
    A=None,
    b=None,
    inequality: InequalityBlock | None = None,
) -> ConvexProgram:
    """Assemble a program, filling absent parts with empty/zero blocks."""
    equality = no_equality(n) if A is None else linear_equality(A, b)
    return ConvexProgram(
        smooth=smooth or zero_smooth(),
        prox=prox or no_prox(),
        equality=equality,
        inequality=inequality or no_inequalities(n),
        dim_n=n,
    )


def eval_objective(p: ConvexProgram, x) -> float:
    x = p.check(x)
    h = p.prox.value_at(x)
    if not np.isfinite(h):
        return np.inf
    return float(p.smooth.value_at(x) + h)


def constraint_violation(p: ConvexProgram, x: Array) -> Array:
    """Stacked ``(Ax - b, max(0, g(x)))``."""
    return np.concatenate([p.equality.residual(x), np.maximum(p.g(x), 0.0)])


def feasibility_violation(p: ConvexProgram, x) -> float:
    x = p.check(x)
    return float(np.linalg.norm(constraint_violation(p, x)))
