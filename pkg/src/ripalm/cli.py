"""Command-line front end: ``ripalm --problem FILE [options]``.

Exit codes: 0 solved, 2 iteration limit, 3 inner solver failure, 1 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracles
from .core import Criterion, SigmaSchedule, SolverParams, Status, TauSchedule, run
from .diagnostics import RateConfig, slope_fit, write_trace_csv
from .problem import eval_objective
from .problem_file import ProblemFileError, load_problem

EXIT_CODES = {Status.SOLVED: 0, Status.MAX_ITERATIONS: 2, Status.INNER_FAILURE: 3}
EXIT_INPUT = 1

REGIME_LABELS = {"constant": "-1", "linear": "-2", "geometric": "geometric"}


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors (exit 1), not argparse's usual 2
    def error(self, message):
        raise InputError(message)


def parse_sigma(text: str) -> SigmaSchedule:
    kind, _, rest = text.partition(":")
    try:
        vals = [float(v) for v in rest.split(",")] if rest else []
        if kind == "const" and len(vals) == 1:
            return SigmaSchedule.constant(vals[0])
        if kind == "linear" and len(vals) == 1:
            return SigmaSchedule.linear(vals[0])
        if kind == "geom" and len(vals) in (2, 3):
            return SigmaSchedule.geometric(*vals)
    except ValueError as exc:
        raise InputError(f"--sigma {text!r}: {exc}") from None
    raise InputError(f"--sigma {text!r}: expected const:<v>, linear:<v0> or geom:<v0>,<c>[,<cap>]")


@dataclass(frozen=True)
class RunConfig:
    problem_path: Path
    rho: float
    sigma: SigmaSchedule
    tau: float
    tol_kkt: float
    max_outer: int
    inner_budget: int
    criterion: Criterion
    trace_path: Path | None
    kappa: float | None
    oracle: bool
    x0: np.ndarray | None

    def params(self) -> SolverParams:
        return SolverParams(
            rho=self.rho,
            sigma=self.sigma,
            tau=TauSchedule(self.tau),
            criterion=self.criterion,
            tol_kkt=self.tol_kkt,
            max_outer=self.max_outer,
            inner_budget=self.inner_budget,
        )


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ripalm", description="Solve a convex program from a JSON problem file.")
    ap.add_argument("--problem", required=True, type=Path, help="JSON problem file")
    ap.add_argument("--rho", type=float, default=0.5, help="relative error parameter in [0, 1)")
    ap.add_argument("--sigma", type=parse_sigma, default=SigmaSchedule.constant(10.0),
                    help="const:<v> | linear:<v0> | geom:<v0>,<c>[,<cap>] (default const:10)")
    ap.add_argument("--tau", type=float, default=1.0, help="proximal weight (default 1)")
    ap.add_argument("--tol", type=float, default=1e-8, help="KKT tolerance (default 1e-8)")
    ap.add_argument("--max-outer", type=int, default=500)
    ap.add_argument("--inner-budget", type=int, default=20000)
    ap.add_argument("--criterion", choices=[c.value for c in Criterion], default="standard")
    ap.add_argument("--trace", type=Path, help="write the per-iteration trace CSV here")
    ap.add_argument("--kappa", type=float, help="error-bound modulus; enables rate-factor columns")
    ap.add_argument("--oracle", action="store_true", help="compare with a reference solution")
    ap.add_argument("--x0", help="comma-separated starting point (default: file x0, else zeros)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def parse_args(argv) -> tuple[RunConfig, bool]:
    ns = build_parser().parse_args(argv)
    x0 = None
    if ns.x0 is not None:
        try:
            x0 = np.array([float(v) for v in ns.x0.split(",")])
        except ValueError:
            raise InputError(f"--x0 {ns.x0!r}: expected comma-separated numbers") from None
    cfg = RunConfig(ns.problem, ns.rho, ns.sigma, ns.tau, ns.tol, ns.max_outer, ns.inner_budget,
                    Criterion(ns.criterion), ns.trace, ns.kappa, ns.oracle, x0)
    try:
        cfg.params().validate()
        if cfg.kappa is not None:
            RateConfig(cfg.kappa)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if cfg.trace_path is not None and not cfg.trace_path.parent.is_dir():
        raise InputError(f"--trace: directory {cfg.trace_path.parent} does not exist")
    return cfg, ns.verbose


def _dense(spec, n):
    if isinstance(spec, dict):
        import scipy.sparse as sp

        return sp.csr_matrix((spec["data"], spec["indices"], spec["indptr"]), shape=tuple(spec["shape"])).toarray()
    return np.asarray(spec, dtype=float).reshape(-1, n)


def oracle_for_doc(doc: dict) -> oracles.OracleSolution | None:
    """Pick a reference solver matching the problem's structure, if any."""
    n = doc["n"]
    obj = doc["objective"]
    if obj["kind"] == "quadratic":
        Q, c, shift = np.asarray(obj["Q"], float), np.asarray(obj["c"], float), 0.0
    elif obj["kind"] == "least_squares":
        M, d = np.asarray(obj["M"], float), np.asarray(obj["d"], float)
        Q, c, shift = M.T @ M, -M.T @ d, 0.5 * float(d @ d)
    else:
        return None
    A = b = None
    if "equality" in doc:
        A = _dense(doc["equality"]["A"], n)
        b = np.asarray(doc["equality"]["b"], float)
    prox = doc.get("prox", {"kind": "none"})
    ineqs = doc.get("inequalities", [])
    affine = [i for i in ineqs if i["kind"] == "affine"]
    quad = [r for i in ineqs if i["kind"] == "quadratic" for r in i["rows"]]

    def shifted(sol, lam=None, mu=None):
        return oracles.OracleSolution(
            sol.x_star,
            sol.lambda_star if lam is None else lam,
            sol.mu_star if mu is None else mu,
            sol.obj_star + shift,
        )

    if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) <= 0:
        return None
    if prox["kind"] == "l1":
        if ineqs or n > 10:
            return None
        return shifted(oracles.solve_l1_qp_bruteforce(Q, c, prox["weight"], A, b))
    if quad:
        if len(quad) > 1 or affine or A is not None or prox["kind"] != "none":
            return None
        r = quad[0]
        return shifted(oracles.solve_single_qcqp(Q, c, r["Q"], r["q"], r["c"]))
    G = np.vstack([np.asarray(i["G"], float).reshape(-1, n) for i in affine]) if affine else np.zeros((0, n))
    h = np.concatenate([np.asarray(i["h"], float) for i in affine]) if affine else np.zeros(0)
    m2 = G.shape[0]
    # bounds from the prox term become extra rows whose multipliers are dropped
    if prox["kind"] == "nonneg":
        G, h = np.vstack([G, -np.eye(n)]), np.concatenate([h, np.zeros(n)])
    elif prox["kind"] == "box":
        lo = np.broadcast_to(np.asarray(prox["lo"], float), (n,))
        hi = np.broadcast_to(np.asarray(prox["hi"], float), (n,))
        fin_hi, fin_lo = np.isfinite(hi), np.isfinite(lo)
        G = np.vstack([G, np.eye(n)[fin_hi], -np.eye(n)[fin_lo]])
        h = np.concatenate([h, hi[fin_hi], -lo[fin_lo]])
    if G.shape[0] == 0:
        return shifted(oracles.solve_equality_qp(Q, c, A, b))
    if G.shape[0] > 20:
        return None
    sol = oracles.solve_inequality_qp_bruteforce(Q, c, G, h, A, b)
    if prox["kind"] == "nonneg":
        sol = oracles.OracleSolution(np.maximum(sol.x_star, 0.0), sol.lambda_star, sol.mu_star, sol.obj_star)
    elif prox["kind"] == "box":
        sol = oracles.OracleSolution(np.clip(sol.x_star, lo, hi), sol.lambda_star, sol.mu_star, sol.obj_star)
    return shifted(sol, mu=sol.mu_star[:m2])


def _regime_slope(records) -> str:
    if len(records) < 10:
        return "n/a (fewer than 10 iterations)"
    ks = [r.k + 1 for r in records]
    vals = [r.feas_ergodic for r in records]
    pairs = [(k, v) for k, v in zip(ks, vals) if v > 0]
    if len(pairs) < 10:
        return "n/a (ergodic feasibility is exactly zero)"
    return f"{slope_fit(*zip(*pairs)):.3f}"


def summarize(cfg: RunConfig, p, st, records, status, doc, out) -> None:
    print(f"status            {status.value}", file=out)
    print(f"iterations        {len(records)}", file=out)
    print(f"inner steps       {sum(r.inner_iters for r in records)}", file=out)
    if records:
        r = records[-1]
        print(f"kkt primal_eq     {r.primal_eq:.3e}", file=out)
        print(f"kkt primal_ineq   {r.primal_ineq:.3e}", file=out)
        print(f"kkt dual_stat     {r.dual_stat:.3e}", file=out)
        print(f"kkt compl         {r.compl:.3e}", file=out)
        print(f"objective         {r.objective:.12g}", file=out)
        print(f"feas(x_hat)       {r.feas_ergodic:.3e}", file=out)
        print(f"Xi_k              {r.xi_k:.3e}", file=out)
        print(f"observed slope    {_regime_slope(records)}  "
              f"(expected {REGIME_LABELS[cfg.sigma.kind]} for {cfg.sigma.kind} sigma)", file=out)
        gap = cfg.params().local_rate_margin()
        print(f"rate condition    sqrt(tau_min) - 2 sqrt(rho) = {gap:.4g} "
              f"({'met' if gap > 0 else 'not met'})", file=out)
        if cfg.kappa is not None:
            print(f"rate gamma/mu     {r.gamma:.6g} / {r.mu_rate:.6g}", file=out)
    print("x                 " + np.array2string(st.x, precision=10, max_line_width=10**6), file=out)
    if cfg.oracle:
        sol = oracle_for_doc(doc)
        if sol is None:
            print("oracle            none available for this problem structure", file=out)
        else:
            err = float(np.linalg.norm(st.x - sol.x_star))
            print(f"oracle |x - x*|   {err:.3e}", file=out)
            print(f"oracle f - f*     {eval_objective(p, st.x) - sol.obj_star:.3e}", file=out)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, verbose = parse_args(argv)
        p, x0_file = load_problem(cfg.problem_path)
        doc = json.loads(cfg.problem_path.read_text())
        x0 = cfg.x0 if cfg.x0 is not None else x0_file
        x0 = np.zeros(p.dim_n) if x0 is None else x0
        if x0.shape != (p.dim_n,):
            raise InputError(f"x0 has length {x0.shape[0]}, problem has n={p.dim_n}")
    except (InputError, ProblemFileError) as exc:
        print(f"ripalm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    rc = RateConfig(cfg.kappa) if cfg.kappa is not None else None
    st, records, status = run(p, x0, cfg.params(), rate_config=rc)
    if cfg.trace_path is not None:
        try:
            write_trace_csv(records, cfg.trace_path)
        except OSError as exc:
            print(f"ripalm: error: cannot write trace: {exc}", file=sys.stderr)
            return EXIT_INPUT
    summarize(cfg, p, st, records, status, doc, sys.stdout)
    return EXIT_CODES[status]


if __name__ == "__main__":
    sys.exit(main())
