"""Shared run harness for the test suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ripalm import corpus
from ripalm.core import Criterion, SigmaSchedule, SolverParams, TauSchedule, initial_state, run


@dataclass
class Recorded:
    problem: corpus.CorpusProblem
    params: SolverParams
    states: list = field(default_factory=list)
    certs: list = field(default_factory=list)
    infos: list = field(default_factory=list)
    records: list = field(default_factory=list)
    status: object = None


_CACHE: dict = {}


def recorded_run(name: str, rho: float = 0.5, criterion=Criterion.STANDARD,
                 sigma: SigmaSchedule | None = None, tol_kkt: float = 1e-8,
                 max_outer: int = 500) -> Recorded:
    key = (name, rho, Criterion(criterion), sigma, tol_kkt, max_outer)
    if key in _CACHE:
        return _CACHE[key]
    cp = corpus.get(name)
    params = SolverParams(rho=rho, sigma=sigma or SigmaSchedule.constant(10.0), tau=TauSchedule(1.0),
                          criterion=Criterion(criterion), tol_kkt=tol_kkt, max_outer=max_outer)
    rec = Recorded(cp, params)
    prog = cp.program
    rec.states.append(initial_state(prog, cp.x0))

    def cb(prev, new, cert, kkt, info):
        rec.states.append(new)
        rec.certs.append(cert)
        rec.infos.append(info)

    _, rec.records, rec.status = run(prog, cp.x0, params, callback=cb)
    _CACHE[key] = rec
    return rec


def rel_close(a, b, rel=1e-9, abs_=1e-12) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b)) + abs_


def sample_points(rng, center, n_points=100, scales=(1e-3, 1e-1, 1.0, 10.0)):
    center = np.asarray(center, dtype=float)
    out = []
    for i in range(n_points):
        s = scales[i % len(scales)]
        out.append(center + s * rng.standard_normal(center.shape))
    return out


# criterion number -> (passed, one-line detail); printed by conftest
ACCEPTANCE: dict = {}


def report(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {number}: {detail}"
