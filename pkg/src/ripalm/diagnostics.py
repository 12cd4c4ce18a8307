"""Ergodic averages, rate bounds and per-iteration invariant checks."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .problem import ConvexProgram, eval_objective, feasibility_violation

Array = np.ndarray

REL_TOL = 1e-9
ABS_TOL = 1e-12


@dataclass(frozen=True)
class ErgodicState:
    """Running sigma-weighted sum of primal iterates plus sequence bounds.

    ``sup_norm_y`` and ``sup_norm_x`` are running maxima over the iterates
    seen so far (starting points included); they stand in for the a priori
    bounds on the dual and primal sequences.
    """

    weighted_sum_x: Array
    weight_total: float
    y0: Array
    sup_norm_y: float
    sup_norm_x: float

    @classmethod
    def start(cls, x0: Array, y0: Array) -> "ErgodicState":
        return cls(np.zeros_like(x0, dtype=float), 0.0, np.array(y0, dtype=float),
                   float(np.linalg.norm(y0)), float(np.linalg.norm(x0)))

    @property
    def x_hat(self) -> Array:
        if not self.weight_total > 0:
            raise ValueError("ergodic average undefined before the first update")
        return self.weighted_sum_x / self.weight_total


def ergodic_update(es: ErgodicState, x_new, y_new, sigma_k: float) -> ErgodicState:
    if not sigma_k > 0:
        raise ValueError("sigma_k must be positive")
    x_new = np.asarray(x_new, dtype=float)
    return ErgodicState(
        es.weighted_sum_x + sigma_k * x_new,
        es.weight_total + sigma_k,
        es.y0,
        max(es.sup_norm_y, float(np.linalg.norm(y_new))),
        max(es.sup_norm_x, float(np.linalg.norm(x_new))),
    )


def xi_bound(es: ErgodicState) -> float:
    """``2 B_y / sum sigma_i``, the ergodic feasibility bound."""
    if not es.weight_total > 0:
        raise ValueError("weight_total must be positive")
    return 2.0 * es.sup_norm_y / es.weight_total


def feas_bound_check(p: ConvexProgram, es: ErgodicState, y_now) -> tuple[float, float, bool]:
    """Compare ``feas(x_hat)`` with ``||y^k - y^0|| / sum sigma_i``.

    The bound follows from telescoping the multiplier updates, so it holds
    to rounding error at every iteration.
    """
    feas = feasibility_violation(p, es.x_hat)
    bound = float(np.linalg.norm(np.asarray(y_now) - es.y0)) / es.weight_total
    return feas, bound, feas <= bound * (1.0 + 1e-10) + ABS_TOL


@dataclass(frozen=True)
class C0Terms:
    """Inputs of the initial-error constant in the objective-gap bound."""

    tau0: float
    x0: Array
    y0: Array
    nu_sum: float = 0.0
    tau_max: float | None = None


def c0_constant(c0: C0Terms, x_star: Array, b_x: float) -> float:
    tau_max = c0.tau0 if c0.tau_max is None else c0.tau_max
    dx = np.asarray(x_star) - np.asarray(c0.x0)
    return (
        0.5 * c0.tau0 * float(dx @ dx)
        + 0.5 * float(np.asarray(c0.y0) @ np.asarray(c0.y0))
        + (float(x_star @ x_star) + b_x**2) * tau_max * c0.nu_sum
    )


def objective_gap_bounds(
    p: ConvexProgram,
    es: ErgodicState,
    x_star,
    y_star,
    c0: C0Terms,
    sigma_delta_sum: float,
    sigma_k: float,
) -> tuple[float, float]:
    """Lower and upper bounds on ``f(x_hat^k) - f(x*)``.

    ``sigma_delta_sum`` is ``sum_{i<k} ||sigma_i delta^{i+1}||``. The lower
    bound holds for any positive ``sigma_k``.
    """
    x_star = np.asarray(x_star, dtype=float)
    xi = xi_bound(es)
    lower = -float(np.linalg.norm(y_star)) * xi - 0.5 * sigma_k * xi * xi
    r2 = float(x_star @ x_star) + es.sup_norm_x**2
    upper = (c0_constant(c0, x_star, es.sup_norm_x) + math.sqrt(2.0 * r2) * sigma_delta_sum) / es.weight_total
    return lower, upper


@dataclass(frozen=True)
class RateConfig:
    """Error-bound modulus ``kappa`` (user supplied) and safety factor ``c``."""

    kappa: float
    c: float = 2.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.c > 1:
            raise ValueError("c must exceed 1")


def gamma_mu(rc: RateConfig, sigma_k: float, tau_k: float, nu_k: float, rho: float) -> tuple[float, float, bool]:
    """Local contraction quantities under the error bound condition.

    Returns ``(gamma, mu, condition_met)``; ``mu`` is the factor by which the
    weighted distance to the solution set shrinks per iteration, ``inf``
    when ``gamma <= -1``. ``condition_met`` needs ``sqrt(tau) > 2 sqrt(rho)``
    and ``gamma > 0``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    kappa = rc.kappa
    tau_bar = max(1.0, tau_k)
    sr = math.sqrt(rho)
    st = math.sqrt(tau_k)
    head = 1.0 - (2.0 * kappa * st * (rho + math.sqrt(rho * tau_bar)) + 2.0 * sigma_k * sr) / (sigma_k * st)
    gamma = head * sigma_k**2 / (kappa**2 * (sr + math.sqrt(tau_bar)) ** 2 * tau_bar)
    mu = math.sqrt((1.0 + nu_k) / (1.0 + gamma)) if gamma > -1.0 else math.inf
    return gamma, mu, bool(st - 2.0 * sr > 0 and gamma > 0)


def sigma_threshold(rc: RateConfig, rho: float, tau_min: float, tau_max: float) -> float:
    """Lower limit on ``liminf sigma_k`` for the local linear rate; ``inf`` if unattainable."""
    gap = math.sqrt(tau_min) - 2.0 * math.sqrt(rho)
    if gap <= 0:
        return math.inf
    tbar = max(1.0, tau_max)
    return rc.c * 2.0 * rc.kappa * math.sqrt(tau_max) * (rho + math.sqrt(rho * tbar)) / gap


def recursion_check(st_prev, st_new, x_star, y_star, rho: float, tau_k: float) -> tuple[float, float, bool]:
    """Both sides of the primal-dual Fejer-type recursion against a saddle point.

    lhs = ||y+ - y*||^2 + ||w+ - x*||^2 + tau ||x+ - x*||^2
    rhs = ||y - y*||^2 + ||w - x*||^2 + tau ||x - x*||^2
          - (1 - rho)(||y+ - y||^2 + tau ||x+ - x||^2)
    """
    def sq(v):
        v = np.asarray(v, dtype=float)
        return float(v @ v)

    x_star = np.asarray(x_star, dtype=float)
    y_star = np.asarray(y_star, dtype=float)
    lhs = sq(st_new.y - y_star) + sq(st_new.w - x_star) + tau_k * sq(st_new.x - x_star)
    rhs = (
        sq(st_prev.y - y_star) + sq(st_prev.w - x_star) + tau_k * sq(st_prev.x - x_star)
        - (1.0 - rho) * (sq(st_new.y - st_prev.y) + tau_k * sq(st_new.x - st_prev.x))
    )
    return lhs, rhs, lhs <= rhs + REL_TOL * abs(rhs) + ABS_TOL


def summability_monitor(trace) -> tuple[list[float], bool]:
    """Partial sums of ``||sigma_k delta^{k+1}||`` and a Cauchy-tail flag.

    ``trace`` is a sequence of :class:`TraceRecord` or of plain norms. The
    flag is set when the last quarter of the run adds at most
    ``1e-6 (1 + head sum)``.
    """
    norms = [r.sigma_delta_norm if isinstance(r, TraceRecord) else float(r) for r in trace]
    if not norms:
        raise ValueError("trace is empty")
    partial = np.cumsum(norms).tolist()
    n = len(partial)
    q = max(1, n // 4)
    head = partial[n - q - 1] if n > q else 0.0
    return partial, (partial[-1] - head) <= 1e-6 * (1.0 + head)


def slope_fit(ks: Sequence[float], vals: Sequence[float], min_points: int = 10) -> float:
    """Least-squares slope of ``log(vals)`` against ``log(ks)``."""
    ks = np.asarray(ks, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if ks.shape != vals.shape:
        raise ValueError("ks and vals must have equal length")
    if ks.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {ks.size}")
    if np.any(vals <= 0) or np.any(ks <= 0):
        raise ValueError("slope_fit needs positive ks and values")
    slope, _ = np.polyfit(np.log(ks), np.log(vals), 1)
    return float(slope)


# --------------------------------------------------------------------------
# Trace
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    """One outer iteration ``k`` (producing ``x^{k+1}``).

    Ergodic columns refer to the average of ``x^1 .. x^{k+1}``. ``gamma`` and
    ``mu_rate`` are NaN unless a :class:`RateConfig` was supplied.
    """

    k: int
    sigma_k: float
    tau_k: float
    inner_iters: int
    crit_lhs: float
    crit_rhs: float
    fallback: int
    primal_eq: float
    primal_ineq: float
    dual_stat: float
    compl: float
    feas_ergodic: float
    xi_k: float
    feas_exact_bound: float
    sigma_delta_norm: float
    sigma_delta_sum: float
    objective: float
    objective_ergodic: float
    gamma: float
    mu_rate: float


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))
_INT_COLUMNS = {"k", "inner_iters", "fallback"}


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_trace_csv(records: Iterable[TraceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([_fmt(v) for v in astuple(r)])


def read_trace_csv(path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header in {path}")
        return [
            TraceRecord(**{c: (int(row[c]) if c in _INT_COLUMNS else float(row[c])) for c in TRACE_COLUMNS})
            for row in reader
        ]


def xi_full_run(records: Sequence[TraceRecord]) -> list[float]:
    """Recompute every ``Xi_k`` with the dual bound of the whole run."""
    totals = np.cumsum([r.sigma_k for r in records])
    b_y = max(r.xi_k * t / 2.0 for r, t in zip(records, totals))
    return [2.0 * b_y / t for t in totals]


class TraceBuilder:
    """Accumulates ergodic state and trace records during a run."""

    def __init__(self, p: ConvexProgram, st0, params, rate_config: RateConfig | None = None):
        self.p = p
        self.params = params
        self.rate_config = rate_config
        self.ergodic = ErgodicState.start(st0.x, st0.y)
        self.sigma_delta_sum = 0.0
        self.records: list[TraceRecord] = []

    def add(self, st_prev, st_new, cert, kkt, info) -> TraceRecord:
        k = st_prev.k
        sigma, tau = info.sigma, info.tau
        self.ergodic = ergodic_update(self.ergodic, st_new.x, st_new.y, sigma)
        feas, bound, _ = feas_bound_check(self.p, self.ergodic, st_new.y)
        sd = float(np.linalg.norm(sigma * cert.delta))
        self.sigma_delta_sum += sd
        if self.rate_config is not None:
            gamma, mu, _ = gamma_mu(self.rate_config, sigma, tau, self.params.tau.nu_at(k), self.params.rho)
        else:
            gamma = mu = math.nan
        rec = TraceRecord(
            k=k,
            sigma_k=sigma,
            tau_k=tau,
            inner_iters=cert.inner_iters,
            crit_lhs=info.crit_lhs,
            crit_rhs=info.crit_rhs,
            fallback=int(cert.exact_fallback),
            primal_eq=kkt.primal_eq,
            primal_ineq=kkt.primal_ineq,
            dual_stat=kkt.dual_stat,
            compl=kkt.compl,
            feas_ergodic=feas,
            xi_k=xi_bound(self.ergodic),
            feas_exact_bound=bound,
            sigma_delta_norm=sd,
            sigma_delta_sum=self.sigma_delta_sum,
            objective=eval_objective(self.p, st_new.x),
            objective_ergodic=eval_objective(self.p, self.ergodic.x_hat),
            gamma=gamma,
            mu_rate=mu,
        )
        self.records.append(rec)
        return rec
