"""Outer loop of ripALM: schedules, acceptance tests, steps and the run driver."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .auglag import Multipliers, complementarity_residual, multiplier_update
from .inner import (
    BacktrackingError,
    Certificate,
    InnerBudgetExhausted,
    SubproblemSpec,
    solve_subproblem,
)
from .problem import ConvexProgram, eval_objective

logger = logging.getLogger(__name__)

Array = np.ndarray


# --------------------------------------------------------------------------
# Parameter schedules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaSchedule:
    """Penalty sequence.

    kind is one of ``"constant"`` (``sigma0``), ``"linear"``
    (``sigma0 * (k + 1)``) or ``"geometric"`` (``min(sigma0 * c**k, cap)``).
    """

    kind: str = "constant"
    sigma0: float = 10.0
    c: float = 2.0
    cap: float = 1e8

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "geometric"):
            raise ValueError(f"unknown sigma schedule {self.kind!r}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.kind == "geometric":
            if not self.c > 1:
                raise ValueError("geometric schedule needs c > 1")
            if not self.cap >= self.sigma0:
                raise ValueError("cap must be at least sigma0")

    @classmethod
    def constant(cls, sigma: float) -> "SigmaSchedule":
        return cls("constant", sigma)

    @classmethod
    def linear(cls, sigma0: float = 1.0) -> "SigmaSchedule":
        return cls("linear", sigma0)

    @classmethod
    def geometric(cls, sigma0: float, c: float, cap: float = 1e8) -> "SigmaSchedule":
        return cls("geometric", sigma0, c, cap)

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.sigma0
        if self.kind == "linear":
            return self.sigma0 * (k + 1)
        # log-space comparison avoids overflow for large k
        if k * math.log(self.c) >= math.log(self.cap / self.sigma0):
            return self.cap
        return min(self.sigma0 * self.c**k, self.cap)

    def capped_from(self) -> int | None:
        """First index at which the cap is active (geometric only)."""
        if self.kind != "geometric" or not math.isfinite(self.cap):
            return None
        k = 0
        while self(k) < self.cap:
            k += 1
        return k


@dataclass(frozen=True)
class TauSchedule:
    """``tau_k = tau0 * prod_{i<k} (1 + nu_i)``; ``nu`` is finitely supported."""

    tau0: float = 1.0
    nu: tuple = ()

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if any(not (v >= 0 and math.isfinite(v)) for v in self.nu):
            raise ValueError("nu must be finite and nonnegative")
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))

    def nu_at(self, k: int) -> float:
        return self.nu[k] if k < len(self.nu) else 0.0

    def __call__(self, k: int) -> float:
        return self.tau0 * math.prod(1.0 + v for v in self.nu[:k])

    @property
    def nu_sum(self) -> float:
        return float(sum(self.nu))

    @property
    def tau_max(self) -> float:
        return self(len(self.nu))

    @property
    def tau_min(self) -> float:
        return self.tau0


class Criterion(str, enum.Enum):
    STANDARD = "standard"
    STRENGTHENED = "strengthened"


class Status(str, enum.Enum):
    SOLVED = "Solved"
    MAX_ITERATIONS = "MaxIterations"
    INNER_FAILURE = "InnerFailure"


@dataclass(frozen=True)
class SolverParams:
    rho: float = 0.5
    sigma: SigmaSchedule = field(default_factory=SigmaSchedule)
    tau: TauSchedule = field(default_factory=TauSchedule)
    criterion: Criterion = Criterion.STANDARD
    tol_kkt: float = 1e-8
    max_outer: int = 500
    inner_budget: int = 20000
    abs_eps: float | None = None

    def validate(self) -> None:
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.tol_kkt >= 0:
            raise ValueError("tol_kkt must be nonnegative")
        if self.max_outer < 1 or self.inner_budget < 1:
            raise ValueError("max_outer and inner_budget must be positive")
        Criterion(self.criterion)

    def local_rate_margin(self) -> float:
        """``sqrt(tau_min) - 2 sqrt(rho)``; positive is needed for fast local rates."""
        return math.sqrt(self.tau.tau_min) - 2.0 * math.sqrt(self.rho)


# --------------------------------------------------------------------------
# State
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IterateState:
    x: Array
    lam: Array
    mu: Array
    w: Array
    k: int = 0
    last_delta: Array | None = None
    last_sigma: float | None = None
    last_tau: float | None = None

    @property
    def multipliers(self) -> Multipliers:
        return Multipliers(self.lam, self.mu)

    @property
    def y(self) -> Array:
        return np.concatenate([self.lam, self.mu])


def initial_state(p: ConvexProgram, x0, w0=None) -> IterateState:
    x0 = p.check(x0).copy()
    w0 = x0.copy() if w0 is None else p.check(w0).copy()
    return IterateState(x0, np.zeros(p.m1), np.zeros(p.m2), w0, 0)


@dataclass(frozen=True)
class KktResidual:
    primal_eq: float
    primal_ineq: float
    dual_stat: float
    compl: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.primal_eq, self.primal_ineq, self.dual_stat, self.compl)

    def scaled_max(self, b_norm: float, mu_norm: float) -> float:
        return max(
            self.primal_eq / (1.0 + b_norm),
            self.primal_ineq / (1.0 + b_norm),
            self.dual_stat,
            self.compl / (1.0 + mu_norm),
        )


# --------------------------------------------------------------------------
# Error criteria
# --------------------------------------------------------------------------


def _criterion_sides(w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid):
    sd = sigma * np.asarray(delta, dtype=float)
    cross = 2.0 * abs(float(np.dot(np.asarray(w) - x_new, sd)))
    sd_sq = float(sd @ sd)
    se = sigma * np.asarray(eq_resid, dtype=float)
    cr = np.asarray(compl_resid, dtype=float)
    dx = np.asarray(x_new) - np.asarray(x_old)
    rhs = rho * (float(se @ se) + float(cr @ cr) + tau * float(dx @ dx))
    return cross + sd_sq, math.sqrt(sd_sq), rhs


def check_criterion_standard(
    w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid
) -> tuple[bool, float, float]:
    """Relative error test ``2|<w - x+, s D>| + ||s D||^2 <= rho * (...)``.

    ``compl_resid`` is ``min(mu, -sigma g(x_new))`` at the current multiplier.
    """
    lhs, _, rhs = _criterion_sides(w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid)
    return lhs <= rhs, lhs, rhs


def check_criterion_strengthened(
    w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid
) -> tuple[bool, float, float]:
    """As the standard test, with ``||sigma delta||`` also bounded by the rhs.

    Forces ``sum_k ||sigma_k delta_k||`` to be finite.
    """
    quad, lin, rhs = _criterion_sides(w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid)
    lhs = max(quad, lin)
    return lhs <= rhs, lhs, rhs


_CHECKS = {
    Criterion.STANDARD: check_criterion_standard,
    Criterion.STRENGTHENED: check_criterion_strengthened,
}


def criterion_check(kind) -> Callable:
    return _CHECKS[Criterion(kind)]


# --------------------------------------------------------------------------
# Steps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StepInfo:
    """What an outer step leaves behind besides the new state."""

    sigma: float
    tau: float
    crit_lhs: float
    crit_rhs: float
    accepted: bool


def kkt_residual(p: ConvexProgram, st: IterateState, cert: Certificate) -> KktResidual:
    """KKT residual at ``(st.x, st.y)``, the state produced with ``cert``.

    The stationarity element is ``delta - (tau/sigma)(x+ - x)``, which lies in
    the x-part of the Lagrangian subdifferential at the new point.
    """
    pvec = cert.delta - (st.last_tau / st.last_sigma) * (st.x - cert.anchor)
    g = p.g(st.x)
    return KktResidual(
        primal_eq=float(np.linalg.norm(p.equality.residual(st.x))),
        primal_ineq=float(np.linalg.norm(np.maximum(g, 0.0))),
        dual_stat=float(np.linalg.norm(pvec)),
        compl=float(np.linalg.norm(np.minimum(st.mu, -g))),
    )


def outer_step(
    p: ConvexProgram, st: IterateState, params: SolverParams
) -> tuple[IterateState, Certificate, KktResidual, StepInfo]:
    k = st.k
    sigma = params.sigma(k)
    tau = params.tau(k)
    check = criterion_check(params.criterion)
    spec = SubproblemSpec(p, st.multipliers, sigma, tau, st.x, st.x)
    last = {}

    def accept(x_new, delta):
        eq = p.equality.residual(x_new)
        cr = complementarity_residual(st.mu, p.g(x_new), sigma)
        ok, lhs, rhs = check(st.w, x_new, st.x, delta, sigma, tau, params.rho, eq, cr)
        last.update(lhs=lhs, rhs=rhs, ok=ok)
        return ok

    cert = solve_subproblem(spec, accept, params.inner_budget, params.abs_eps)
    m_new = multiplier_update(p, st.multipliers, cert.x_new, sigma)
    new = IterateState(
        x=cert.x_new,
        lam=m_new.lam,
        mu=m_new.mu,
        w=st.w - sigma * cert.delta,
        k=k + 1,
        last_delta=cert.delta,
        last_sigma=sigma,
        last_tau=tau,
    )
    kkt = kkt_residual(p, new, cert)
    info = StepInfo(sigma, tau, last["lhs"], last["rhs"], last["ok"])
    return new, cert, kkt, info


StepCallback = Callable[[IterateState, IterateState, Certificate, KktResidual, StepInfo], None]


def run(
    p: ConvexProgram,
    x0,
    params: SolverParams | None = None,
    callback: StepCallback | None = None,
    rate_config=None,
) -> tuple[IterateState, list, Status]:
    """Run ripALM from ``x0`` with zero multipliers and ``w0 = x0``.

    Stops when the scaled KKT residual drops to ``tol_kkt`` (``Solved``),
    after ``max_outer`` steps (``MaxIterations``) or when an inner solve
    fails (``InnerFailure``). Returns the final state, the per-iteration
    trace and the status. ``callback(prev, new, cert, kkt, info)`` sees every
    step.
    """
    from .diagnostics import TraceBuilder

    params = params or SolverParams()
    params.validate()
    st = initial_state(p, x0)
    builder = TraceBuilder(p, st, params, rate_config)
    b_norm = float(np.linalg.norm(p.equality.rhs_b))
    status = Status.MAX_ITERATIONS

    for _ in range(params.max_outer):
        try:
            new, cert, kkt, info = outer_step(p, st, params)
        except (InnerBudgetExhausted, BacktrackingError) as exc:
            logger.warning("inner solve failed at k=%d: %s", st.k, exc)
            status = Status.INNER_FAILURE
            break
        builder.add(st, new, cert, kkt, info)
        if callback is not None:
            callback(st, new, cert, kkt, info)
        st = new
        if kkt.scaled_max(b_norm, float(np.linalg.norm(st.mu))) <= params.tol_kkt:
            status = Status.SOLVED
            break

    return st, builder.records, status


def objective_value(p: ConvexProgram, st: IterateState) -> float:
    return eval_objective(p, st.x)
