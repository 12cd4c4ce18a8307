"""ripALM: inexact proximal augmented Lagrangian solver with a relative error test."""

from .auglag import Multipliers, eval_aug_lagrangian, multiplier_update
from .core import (
    Criterion,
    IterateState,
    KktResidual,
    SigmaSchedule,
    SolverParams,
    Status,
    TauSchedule,
    kkt_residual,
    outer_step,
    run,
)
from .diagnostics import RateConfig, TraceRecord, read_trace_csv, slope_fit, write_trace_csv
from .inner import Certificate, InnerBudgetExhausted, solve_subproblem
from .problem import ConvexProgram, make_program
from .problem_file import ProblemFileError, load_problem, program_from_dict

__all__ = [
    "Certificate",
    "ConvexProgram",
    "Criterion",
    "InnerBudgetExhausted",
    "IterateState",
    "KktResidual",
    "Multipliers",
    "ProblemFileError",
    "RateConfig",
    "SigmaSchedule",
    "SolverParams",
    "Status",
    "TauSchedule",
    "TraceRecord",
    "eval_aug_lagrangian",
    "kkt_residual",
    "load_problem",
    "make_program",
    "multiplier_update",
    "outer_step",
    "program_from_dict",
    "read_trace_csv",
    "run",
    "slope_fit",
    "solve_subproblem",
    "write_trace_csv",
]
