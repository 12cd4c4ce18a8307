import math
from dataclasses import astuple

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ripalm import corpus
from ripalm import problem as pm
from ripalm.core import (
    Criterion,
    IterateState,
    SigmaSchedule,
    SolverParams,
    Status,
    TauSchedule,
    check_criterion_standard,
    check_criterion_strengthened,
    initial_state,
    kkt_residual,
    outer_step,
    run,
)

from helpers import recorded_run

vec = arrays(float, 3, elements=st.floats(-10, 10))


def test_sigma_schedules():
    assert [SigmaSchedule.constant(10)(k) for k in range(3)] == [10, 10, 10]
    assert [SigmaSchedule.linear(1)(k) for k in range(4)] == [1, 2, 3, 4]
    g = SigmaSchedule.geometric(1.0, 2.0, cap=8.0)
    assert [g(k) for k in range(6)] == [1, 2, 4, 8, 8, 8]
    assert g.capped_from() == 3
    assert SigmaSchedule.geometric(1.0, 1.2)(10**6) == 1e8
    with pytest.raises(ValueError):
        SigmaSchedule("cubic")
    with pytest.raises(ValueError):
        SigmaSchedule.geometric(1.0, 0.9)


def test_tau_schedule():
    t = TauSchedule(1.0, (0.5, 1.0))
    assert [t(k) for k in range(4)] == [1.0, 1.5, 3.0, 3.0]
    assert t.tau_max == 3.0 and t.tau_min == 1.0 and t.nu_sum == 1.5
    with pytest.raises(ValueError):
        TauSchedule(1.0, (-0.1,))


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(rho=1.0).validate()
    with pytest.raises(ValueError):
        SolverParams(max_outer=0).validate()
    assert SolverParams(rho=0.25).local_rate_margin() == pytest.approx(0.0)


def crit_args(x_new, delta, w=None, rho=0.5, eq=(), cr=(), tau=1.0, sigma=1.0, x_old=None):
    x_new = np.asarray(x_new, float)
    return (x_new if w is None else w, x_new, x_new if x_old is None else x_old, np.asarray(delta, float),
            sigma, tau, rho, np.asarray(eq, float), np.asarray(cr, float))


def test_standard_criterion_examples():
    ok, lhs, rhs = check_criterion_standard(*crit_args([1.0, 2.0], [0.0, 0.0], w=np.array([5.0, 5.0])))
    assert ok and lhs == 0.0
    ok, lhs, rhs = check_criterion_standard(*crit_args([1.0], [0.1], rho=0.0, eq=[3.0]))
    assert not ok and lhs > 0 and rhs == 0
    # ||delta||^2 = 1, inner sum 4 -> lhs 1 <= rhs 2
    ok, lhs, rhs = check_criterion_standard(*crit_args([0.0, 0.0], [0.6, 0.8], eq=[2.0]))
    assert ok and lhs == pytest.approx(1.0) and rhs == pytest.approx(2.0)


def test_strengthened_criterion_examples():
    assert check_criterion_strengthened(*crit_args([1.0], [0.0]))[0]
    # ||sigma delta|| = 0.3, quadratic part 0.09, rhs 0.2 -> lhs 0.3, rejected
    ok, lhs, rhs = check_criterion_strengthened(*crit_args([0.0], [0.3], rho=0.5, eq=[math.sqrt(0.4)]))
    assert not ok and lhs == pytest.approx(0.3) and rhs == pytest.approx(0.2)


@given(vec, vec, vec, vec, st.floats(0.01, 100), st.floats(0.01, 10), st.floats(0, 0.99),
       arrays(float, 2, elements=st.floats(-5, 5)))
def test_strengthened_implies_standard(w, x_new, x_old, delta, sigma, tau, rho, eq):
    args = (w, x_new, x_old, delta, sigma, tau, rho, eq, np.zeros(0))
    ok_s, lhs_s, rhs_s = check_criterion_strengthened(*args)
    ok, lhs, rhs = check_criterion_standard(*args)
    assert rhs == rhs_s and lhs_s >= lhs
    if ok_s:
        assert ok


def one_d_program():
    return pm.make_program(1, pm.quadratic([[1.0]], [0.0]), A=[[1.0]], b=[1.0])


def test_outer_step_one_d_equality_qp():
    p = one_d_program()
    params = SolverParams(rho=0.5, sigma=SigmaSchedule.constant(1.0), tau=TauSchedule(1.0))
    st0 = initial_state(p, [0.0])
    st1, cert, kkt, info = outer_step(p, st0, params)
    assert st1.k == 1 and info.accepted
    np.testing.assert_allclose(st1.lam, 1.0 * (cert.x_new - 1.0), rtol=0, atol=0)
    np.testing.assert_array_equal(st1.w, st0.w - 1.0 * cert.delta)
    # recompute the accepted criterion from raw state
    sd = cert.delta
    lhs = 2 * abs((st0.w - st1.x) @ sd) + sd @ sd
    rhs = 0.5 * ((st1.x[0] - 1.0) ** 2 + (st1.x[0] - st0.x[0]) ** 2)
    assert lhs <= rhs


def test_outer_step_at_saddle_point_is_stationary():
    cp = corpus.get("eqqp_random")
    p = cp.program
    o = cp.oracle
    st = IterateState(o.x_star.copy(), o.lambda_star.copy(), np.zeros(0), o.x_star.copy(), 3)
    new, cert, kkt, _ = outer_step(p, st, SolverParams())
    assert new.k == 4
    np.testing.assert_allclose(new.x, o.x_star, atol=1e-10)
    np.testing.assert_allclose(new.lam, o.lambda_star, atol=1e-8)
    assert max(kkt.as_tuple()) <= 1e-8


def test_w_telescopes():
    r = recorded_run("l1_lsq_eq")
    w0 = r.states[0].w
    total = sum(info.sigma * c.delta for info, c in zip(r.infos, r.certs))
    np.testing.assert_allclose(r.states[-1].w, w0 - total, rtol=1e-13, atol=1e-13)
    for a, b, c, info in zip(r.states[:-1], r.states[1:], r.certs, r.infos):
        np.testing.assert_array_equal(b.w, a.w - info.sigma * c.delta)


def test_run_unconstrained_converges_fast():
    z = np.array([1.0, -2.0, 3.0])
    p = pm.make_program(3, pm.least_squares(np.eye(3), z))
    params = SolverParams(rho=0.5, sigma=SigmaSchedule.constant(1.0), tau=TauSchedule(1.0), tol_kkt=1e-8)
    traj = []
    st, trace, status = run(p, np.zeros(3), params, callback=lambda a, b, *_: traj.append(b.x))
    assert status is Status.SOLVED
    np.testing.assert_allclose(st.x, z, atol=1e-7)
    # exact proximal point steps with tau/sigma = 1 halve the distance to z,
    # so the count is set by log2(||x0 - z|| / tol), not a small constant
    for k, x in enumerate(traj[:20], start=1):
        np.testing.assert_allclose(x - z, -z / 2**k, rtol=1e-12, atol=1e-15)
    assert len(trace) == math.ceil(math.log2(np.linalg.norm(z) / 1e-8))


def test_run_equality_qp_and_halfspace():
    st, _, status = run(corpus.get("eqqp_2d").program, np.zeros(2))
    assert status is Status.SOLVED
    np.testing.assert_allclose(st.x, [1.0, 1.0], atol=1e-6)
    np.testing.assert_allclose(st.lam, [-1.0], atol=1e-6)
    st, _, status = run(corpus.get("halfspace").program, np.zeros(2))
    assert status is Status.SOLVED
    np.testing.assert_allclose(st.x, [1.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(st.mu, [1.0], atol=1e-6)


def test_run_status_codes():
    p = corpus.get("eqqp_random").program
    _, trace, status = run(p, np.zeros(6), SolverParams(max_outer=2))
    assert status is Status.MAX_ITERATIONS and len(trace) == 2
    _, trace, status = run(p, np.zeros(6), SolverParams(inner_budget=1, abs_eps=0.0))
    assert status is Status.INNER_FAILURE and trace == []


def test_kkt_residual_zero_at_exact_saddle():
    cp = corpus.get("eqqp_2d")
    p = cp.program
    o = cp.oracle
    st = IterateState(o.x_star, o.lambda_star, np.zeros(0), o.x_star, 1, np.zeros(2), 10.0, 1.0)

    class Cert:
        delta = np.zeros(2)
        anchor = o.x_star

    kkt = kkt_residual(p, st, Cert)
    assert max(kkt.as_tuple()) <= 1e-15


@pytest.mark.parametrize("name", corpus.NAMES)
def test_step_identities_along_runs(name):
    r = recorded_run(name)
    assert r.status is Status.SOLVED
    p = r.problem.program
    for a, b, c, info in zip(r.states[:-1], r.states[1:], r.certs, r.infos):
        sigma, tau = info.sigma, info.tau
        assert np.all(b.mu >= 0)
        # sigma u = y^k - y^{k+1} equals (-sigma(Ax-b); min(mu, -sigma g))
        u_sigma = a.y - b.y
        expected = np.concatenate([-sigma * p.equality.residual(b.x),
                                   np.minimum(a.mu, -sigma * p.g(b.x))])
        np.testing.assert_allclose(u_sigma, expected, rtol=1e-12, atol=1e-12 * (1 + np.abs(a.y).max(initial=0)))
        # criterion rhs equals rho (||y+ - y||^2 + tau ||x+ - x||^2)
        dy, dx = b.y - a.y, b.x - a.x
        rhs = r.params.rho * (dy @ dy + tau * dx @ dx)
        assert info.crit_rhs == pytest.approx(rhs, rel=1e-9, abs=1e-20)


@pytest.mark.parametrize("name", corpus.NAMES)
def test_final_residuals_small(name):
    r = recorded_run(name)
    tol = r.params.tol_kkt
    last, prev = r.states[-1], r.states[-2]
    sigma = r.infos[-1].sigma
    tau = r.infos[-1].tau
    delta = r.certs[-1].delta
    p_vec = delta - (tau / sigma) * (last.x - prev.x)
    u = (prev.y - last.y) / sigma
    scale = 1 + np.linalg.norm(r.problem.oracle.y_star)
    assert np.linalg.norm(delta) <= 10 * tol
    assert np.linalg.norm(p_vec) <= 10 * tol
    assert np.linalg.norm(u) <= 10 * tol * scale


@pytest.mark.parametrize("name", corpus.NAMES)
def test_dual_sequence_settles(name):
    r = recorded_run(name, max_outer=500)
    ys = [s.y for s in r.states]
    if len(ys) < 8:
        pytest.skip("run too short to split into quarters")
    d = [np.linalg.norm(y - ys[-1]) for y in ys]
    q = len(d) // 4
    assert max(d[-q:]) <= max(d[:q])


def test_determinism():
    p = corpus.get("l1_eq").program
    a = run(p, np.zeros(4))
    b = run(p, np.zeros(4))
    np.testing.assert_array_equal(a[0].x, b[0].x)
    rows_a = np.array([astuple(r) for r in a[1]], dtype=float)
    rows_b = np.array([astuple(r) for r in b[1]], dtype=float)
    assert np.array_equal(rows_a, rows_b, equal_nan=True)


@pytest.mark.parametrize("name", corpus.NAMES)
def test_multipliers_match_oracle_under_licq(name):
    cp = corpus.get(name)
    if cp.doc.get("prox", {"kind": "none"})["kind"] != "none":
        pytest.skip("bounds in the prox term carry no multiplier to compare")
    p = cp.program
    o = cp.oracle
    active = p.g(o.x_star) >= -1e-9
    rows = np.vstack([np.asarray(cp.doc["equality"]["A"]) if p.m1 else np.zeros((0, p.dim_n)),
                      p.jacobian(o.x_star)[active]])
    if np.linalg.matrix_rank(rows) < rows.shape[0]:
        pytest.skip("LICQ fails; multipliers are not unique")
    st = recorded_run(name).states[-1]
    assert np.linalg.norm(st.y - o.y_star) <= 1e-5 * (1 + np.linalg.norm(o.y_star))
