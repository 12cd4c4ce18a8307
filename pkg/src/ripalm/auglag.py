"""Augmented Lagrangian pieces: value, subproblem gradient, multiplier updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ConvexProgram

Array = np.ndarray


@dataclass(frozen=True)
class Multipliers:
    lam: Array
    mu: Array

    def __post_init__(self):
        if np.any(self.mu < 0):
            raise ValueError("inequality multipliers must be nonnegative")

    @classmethod
    def zeros(cls, p: ConvexProgram) -> "Multipliers":
        return cls(np.zeros(p.m1), np.zeros(p.m2))

    def stacked(self) -> Array:
        return np.concatenate([self.lam, self.mu])


def _check_multipliers(p: ConvexProgram, m: Multipliers) -> None:
    if m.lam.shape != (p.m1,) or m.mu.shape != (p.m2,):
        raise ValueError(
            f"multiplier shapes {m.lam.shape}, {m.mu.shape} do not match "
            f"program with m1={p.m1}, m2={p.m2}"
        )


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")


def eval_aug_lagrangian(p: ConvexProgram, x, m: Multipliers, sigma: float) -> float:
    """Augmented Lagrangian ``L_sigma(x, lam, mu)``; ``inf`` outside dom f."""
    _check_sigma(sigma)
    x = p.check(x)
    _check_multipliers(p, m)
    h = p.prox.value_at(x)
    if not np.isfinite(h):
        return np.inf
    return smooth_aug_lagrangian(p, x, m, sigma) + h


def smooth_aug_lagrangian(p: ConvexProgram, x: Array, m: Multipliers, sigma: float) -> float:
    """Augmented Lagrangian without the prox term of the objective."""
    r = p.equality.residual(x)
    plus = np.maximum(0.0, m.mu + sigma * p.g(x))
    return float(
        p.smooth.value_at(x)
        + m.lam @ r
        + 0.5 * sigma * (r @ r)
        + (plus @ plus - m.mu @ m.mu) / (2.0 * sigma)
    )


def grad_smooth_subproblem(
    p: ConvexProgram, x, m: Multipliers, sigma: float, tau: float, x_anchor
) -> Array:
    """Gradient of the smooth part of the proximal ALM subproblem objective.

    That is ``grad f_s(x) + A'(lam + sigma(Ax - b)) + Jg(x)' max(0, mu + sigma g(x))
    + (tau/sigma)(x - x_anchor)``.
    """
    _check_sigma(sigma)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = p.check(x)
    x_anchor = p.check(x_anchor)
    _check_multipliers(p, m)
    grad = np.asarray(p.smooth.gradient_at(x), dtype=float) + (tau / sigma) * (x - x_anchor)
    if p.m1:
        grad = grad + p.equality.adjoint(m.lam + sigma * p.equality.residual(x))
    if p.m2:
        plus = np.maximum(0.0, m.mu + sigma * p.g(x))
        grad = grad + p.jacobian(x).T @ plus
    return grad


def multiplier_update(p: ConvexProgram, m: Multipliers, x_new, sigma: float) -> Multipliers:
    _check_sigma(sigma)
    x_new = p.check(x_new)
    _check_multipliers(p, m)
    lam = m.lam + sigma * p.equality.residual(x_new)
    mu = np.maximum(0.0, m.mu + sigma * p.g(x_new))
    return Multipliers(lam, mu)


def complementarity_residual(mu, g_vals, sigma: float) -> Array:
    """Componentwise ``min(mu, -sigma * g)``.

    Vanishes exactly when ``mu >= 0``, ``g <= 0`` and ``mu_i g_i = 0``. It also
    equals ``mu - max(0, mu + sigma g)``, the negated inequality multiplier step.
    """
    _check_sigma(sigma)
    return np.minimum(np.asarray(mu, dtype=float), -sigma * np.asarray(g_vals, dtype=float))
