"""Accelerated proximal gradient for the proximal ALM subproblem.

The subproblem objective is

    Psi(x) = L_sigma(x, lam, mu) + (tau / 2 sigma) ||x - x_anchor||^2,

split into a smooth part ``phi`` and the prox term of the objective. Every
proximal gradient step ``x+ = prox_t(z - t grad phi(z))`` comes with the
certificate

    delta = (z - x+)/t + grad phi(x+) - grad phi(z)  in  dPsi(x+),

which is an exact subgradient for any step size ``t``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .auglag import Multipliers, grad_smooth_subproblem, smooth_aug_lagrangian
from .problem import ConvexProgram, operator_norm

logger = logging.getLogger(__name__)

Array = np.ndarray

EPS = np.finfo(float).eps

# Multiple of machine epsilon times the gradient scale below which a
# certificate is indistinguishable from zero.
FP_SAFETY = 10.0


class BacktrackingError(RuntimeError):
    pass


class InnerBudgetExhausted(RuntimeError):
    """Raised when no step satisfied the acceptance test within the budget."""

    def __init__(self, message: str, best: "Certificate | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SubproblemSpec:
    program: ConvexProgram
    multipliers: Multipliers
    sigma: float
    tau: float
    x_anchor: Array
    warm_start: Array

    def __post_init__(self):
        if not self.sigma > 0 or not self.tau > 0:
            raise ValueError("sigma and tau must be positive")

    @property
    def strong_convexity(self) -> float:
        return self.tau / self.sigma

    def smooth_value(self, x: Array) -> float:
        d = x - self.x_anchor
        return smooth_aug_lagrangian(
            self.program, x, self.multipliers, self.sigma
        ) + 0.5 * self.strong_convexity * (d @ d)

    def smooth_grad(self, x: Array) -> Array:
        return grad_smooth_subproblem(
            self.program, x, self.multipliers, self.sigma, self.tau, self.x_anchor
        )

    def value(self, x: Array) -> float:
        h = self.program.prox.value_at(x)
        if not np.isfinite(h):
            return np.inf
        return self.smooth_value(x) + h

    def lipschitz_estimate(self) -> float:
        p = self.program
        L = p.smooth.lipschitz_bound + self.strong_convexity
        if p.m1:
            L += self.sigma * operator_norm(p.equality.matrix_a) ** 2
        if p.m2:
            L += self.sigma * operator_norm(p.jacobian(self.warm_start)) ** 2
        return max(L, self.strong_convexity)

    def gradient_scale(self, x: Array) -> float:
        """Magnitude of the terms summed in ``smooth_grad(x)``.

        Rounding in the gradient is a small multiple of ``EPS`` times this.
        """
        p = self.program
        m = self.multipliers
        nx = np.linalg.norm(x)
        s = np.linalg.norm(p.smooth.gradient_at(x)) + p.smooth.lipschitz_bound * nx
        s += self.strong_convexity * (nx + np.linalg.norm(self.x_anchor))
        if p.m1:
            na = operator_norm(p.equality.matrix_a)
            s += na * (np.linalg.norm(m.lam) + self.sigma * (na * nx + np.linalg.norm(p.equality.rhs_b)))
        if p.m2:
            nj = operator_norm(p.jacobian(x))
            s += nj * (np.linalg.norm(m.mu) + self.sigma * np.linalg.norm(p.g(x)))
        return float(s)


@dataclass(frozen=True)
class Certificate:
    """Inexact subproblem solution with a subgradient of Psi at ``x_new``.

    ``exact_fallback`` marks steps accepted because ``delta`` was at the
    floating-point noise floor rather than through the acceptance test.
    """

    x_new: Array
    delta: Array
    inner_iters: int
    step_size: float
    exact_fallback: bool = False
    values: tuple = field(default=(), repr=False)
    anchor: Array | None = field(default=None, repr=False)


def prox_grad_step(s: SubproblemSpec, z, t: float) -> Array:
    """One proximal gradient step with step size ``t``."""
    if not t > 0:
        raise ValueError("step size must be positive")
    z = np.asarray(z, dtype=float)
    return s.program.prox.prox_at(z - t * s.smooth_grad(z), t)


def certificate_from_step(s: SubproblemSpec, z, x_plus, t: float) -> Array:
    z = np.asarray(z, dtype=float)
    x_plus = np.asarray(x_plus, dtype=float)
    return (z - x_plus) / t + s.smooth_grad(x_plus) - s.smooth_grad(z)


def _sufficient_decrease(s, z, x_plus, t, phi_z, grad_z) -> bool:
    d = x_plus - z
    dd = d @ d
    if dd == 0.0:
        return True
    phi_plus = s.smooth_value(x_plus)
    model = phi_z + grad_z @ d + dd / (2.0 * t)
    if phi_plus <= model:
        return True
    # function differences drown in rounding near the minimizer; fall back to
    # the curvature form of the same condition
    if abs(phi_plus - phi_z) <= 1e-10 * max(1.0, abs(phi_z)):
        return (s.smooth_grad(x_plus) - grad_z) @ d <= dd / t
    return False


def backtracking_step(
    s: SubproblemSpec, z, t: float, shrink: float = 0.5, max_halvings: int = 60
) -> tuple[Array, float]:
    """Proximal gradient step, shrinking ``t`` until sufficient decrease holds."""
    z = np.asarray(z, dtype=float)
    phi_z = s.smooth_value(z)
    grad_z = s.smooth_grad(z)
    for _ in range(max_halvings + 1):
        x_plus = s.program.prox.prox_at(z - t * grad_z, t)
        if _sufficient_decrease(s, z, x_plus, t, phi_z, grad_z):
            return x_plus, t
        t *= shrink
    raise BacktrackingError(
        f"no sufficient decrease after {max_halvings} halvings (t={t:.3e}); "
        "check the gradient oracle and convexity"
    )


def fp_floor(s: SubproblemSpec, x: Array, t: float, abs_eps: float | None = None) -> float:
    """Size below which a certificate cannot be told apart from zero."""
    nx = np.linalg.norm(x)
    if abs_eps is None:
        abs_eps = 1e-14 * (1.0 + nx)
    noise = FP_SAFETY * EPS * np.sqrt(x.shape[0]) * (s.gradient_scale(x) + nx / t)
    return max(abs_eps, noise)


def solve_subproblem(
    s: SubproblemSpec,
    accept: Callable[[Array, Array], bool],
    budget: int = 10000,
    abs_eps: float | None = None,
    step_size: float | None = None,
) -> Certificate:
    """Run FISTA with function-value restart until ``accept(x, delta)`` holds.

    The iterate is checked after every proximal gradient step. A step whose
    certificate is below ``fp_floor`` is also accepted, flagged as
    ``exact_fallback``: at an exact fixed point only ``delta = 0`` can pass a
    relative test, and that is out of reach in floating point.

    Raises
    ------
    InnerBudgetExhausted
        If ``budget`` steps pass without acceptance; ``.best`` holds the
        certificate at the lowest objective value seen.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    t = step_size if step_size is not None else 1.0 / s.lipschitz_estimate()
    x_prev = np.array(s.warm_start, dtype=float)
    y = x_prev.copy()
    theta = 1.0
    psi_prev = s.value(x_prev)
    best = None
    best_val = np.inf
    values = []

    for it in range(1, budget + 1):
        x, t = backtracking_step(s, y, t)
        psi = s.value(x)
        if psi > psi_prev and not np.array_equal(y, x_prev):
            # momentum overshot: restart from the last iterate
            theta = 1.0
            y = x_prev
            x, t = backtracking_step(s, y, t)
            psi = s.value(x)
        delta = certificate_from_step(s, y, x, t)
        if psi < best_val:
            best_val = psi
            best = Certificate(x, delta, it, t, anchor=s.x_anchor)
        values.append(best_val)

        if accept(x, delta):
            return Certificate(x, delta, it, t, False, tuple(values), s.x_anchor)
        if np.linalg.norm(delta) <= fp_floor(s, x, t, abs_eps):
            logger.debug("inner step %d accepted at the rounding floor", it)
            return Certificate(x, delta, it, t, True, tuple(values), s.x_anchor)

        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        y = x + ((theta - 1.0) / theta_next) * (x - x_prev)
        theta = theta_next
        x_prev = x
        psi_prev = psi

    raise InnerBudgetExhausted(
        f"acceptance test not met within {budget} inner steps", best
    )
