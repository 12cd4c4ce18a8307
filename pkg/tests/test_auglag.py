import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ripalm import corpus
from ripalm import problem as pm
from ripalm.auglag import (
    Multipliers,
    complementarity_residual,
    eval_aug_lagrangian,
    grad_smooth_subproblem,
    multiplier_update,
    smooth_aug_lagrangian,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def scalar_ineq(value):
    return pm.InequalityBlock(lambda x: np.array([value]), lambda x: np.zeros((1, x.shape[0])), 1)


def test_value_examples():
    p = pm.make_program(1, A=[[1.0]], b=[0.0])
    assert eval_aug_lagrangian(p, [2.0], Multipliers(np.array([1.0]), np.zeros(0)), 1.0) == pytest.approx(4.0)
    p = pm.make_program(1, inequality=scalar_ineq(-1.0))
    assert eval_aug_lagrangian(p, [0.0], Multipliers(np.zeros(0), np.array([0.0])), 1.0) == 0.0
    p = pm.make_program(1, inequality=scalar_ineq(1.0))
    assert eval_aug_lagrangian(p, [0.0], Multipliers(np.zeros(0), np.array([2.0])), 1.0) == pytest.approx(2.5)


def test_value_outside_domain_is_inf():
    p = pm.make_program(2, prox=pm.nonneg_indicator())
    assert eval_aug_lagrangian(p, [-1.0, 0.0], Multipliers.zeros(p), 1.0) == np.inf


def test_gradient_examples():
    p = pm.make_program(3)
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(grad_smooth_subproblem(p, x, Multipliers.zeros(p), 1.0, 1.0, x), 0.0)
    p = pm.make_program(1, pm.quadratic([[1.0]], [0.0]), A=[[1.0]], b=[0.0])
    g = grad_smooth_subproblem(p, [1.0], Multipliers(np.zeros(1), np.zeros(0)), 2.0, 2.0, [0.0])
    assert g[0] == pytest.approx(4.0)


def test_invalid_parameters_rejected():
    p = pm.make_program(1, A=[[1.0]], b=[0.0])
    m = Multipliers(np.zeros(1), np.zeros(0))
    with pytest.raises(ValueError):
        eval_aug_lagrangian(p, [1.0], m, 0.0)
    with pytest.raises(ValueError):
        grad_smooth_subproblem(p, [1.0], m, 1.0, 0.0, [0.0])
    with pytest.raises(ValueError):
        Multipliers(np.zeros(0), np.array([-1.0]))
    with pytest.raises(ValueError):
        multiplier_update(p, Multipliers(np.zeros(2), np.zeros(0)), [1.0], 1.0)


def test_multiplier_update_examples():
    p = pm.make_program(2, A=np.eye(2), b=[0.0, 0.0])
    m = multiplier_update(p, Multipliers(np.zeros(2), np.zeros(0)), [1.0, -2.0], 1.0)
    np.testing.assert_array_equal(m.lam, [1.0, -2.0])
    p = pm.make_program(2, inequality=pm.affine_rows(np.eye(2), [0.0, 0.0]))
    m = multiplier_update(p, Multipliers(np.zeros(0), np.array([1.0, 0.0])), [-1.0, 0.5], 2.0)
    np.testing.assert_array_equal(m.mu, [0.0, 1.0])


def test_multipliers_unchanged_at_feasible_point():
    p = pm.make_program(2, A=[[1.0, 1.0]], b=[2.0], inequality=pm.affine_rows([[1.0, 0.0]], [5.0]))
    m = Multipliers(np.array([0.7]), np.array([0.0]))
    out = multiplier_update(p, m, [1.0, 1.0], 4.0)
    np.testing.assert_array_equal(out.lam, m.lam)
    np.testing.assert_array_equal(out.mu, m.mu)


def test_complementarity_examples():
    np.testing.assert_array_equal(complementarity_residual([0.0, 0.0], [-1.0, -2.0], 1.0), [0.0, 0.0])
    np.testing.assert_array_equal(complementarity_residual([3.0], [0.0], 5.0), [0.0])
    np.testing.assert_array_equal(complementarity_residual([1.0], [2.0], 1.0), [-2.0])


def ulps_error(mu, sg):
    lhs = np.maximum(0.0, mu + sg) - mu
    rhs = -np.minimum(mu, -sg)
    scale = np.spacing(np.maximum(np.abs(mu), np.abs(sg)))
    return np.abs(lhs - rhs) / np.maximum(scale, np.finfo(float).tiny)


@given(arrays(float, 6, elements=st.floats(0, 1e6)), arrays(float, 6, elements=finite), st.floats(1e-3, 1e4))
def test_multiplier_step_identity_within_4_ulps(mu, g, sigma):
    assert np.all(ulps_error(mu, sigma * g) <= 4)
    p = pm.make_program(6, inequality=pm.affine_rows(np.eye(6), -g))
    m_new = multiplier_update(p, Multipliers(np.zeros(0), mu), np.zeros(6), sigma)
    assert np.all(m_new.mu >= 0)
    step = m_new.mu - mu
    cr = complementarity_residual(mu, g, sigma)
    np.testing.assert_allclose(np.linalg.norm(step), np.linalg.norm(cr), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("name", corpus.NAMES)
def test_subproblem_gradient_matches_finite_differences(name):
    p = corpus.get(name).program
    rng = np.random.default_rng(3)
    for trial in range(5):
        x = rng.standard_normal(p.dim_n)
        anchor = rng.standard_normal(p.dim_n)
        m = Multipliers(rng.standard_normal(p.m1), np.abs(rng.standard_normal(p.m2)))
        sigma, tau = 10.0 ** rng.uniform(-1, 1), 10.0 ** rng.uniform(-1, 1)

        def phi(z):
            d = z - anchor
            return smooth_aug_lagrangian(p, z, m, sigma) + tau / (2 * sigma) * (d @ d)

        h = 1e-6
        fd = np.array([(phi(x + h * e) - phi(x - h * e)) / (2 * h) for e in np.eye(p.dim_n)])
        g = grad_smooth_subproblem(p, x, m, sigma, tau, anchor)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


@settings(max_examples=50)
@given(arrays(float, 3, elements=st.floats(-5, 5)), arrays(float, 1, elements=st.floats(-5, 5)),
       arrays(float, 1, elements=st.floats(0, 5)), st.floats(0.1, 10))
def test_value_consistent_with_parts(x, lam, mu, sigma):
    p = corpus.get("qcqp_ellipse").program
    pe = pm.make_program(3, p.smooth, p.prox, A=[[1.0, -1.0, 0.5]], b=[0.2], inequality=p.inequality)
    m = Multipliers(lam, mu)
    r = pe.equality.residual(x)
    plus = np.maximum(0.0, mu + sigma * pe.g(x))
    expected = (pe.smooth.value_at(x) + lam @ r + sigma / 2 * r @ r
                + (plus @ plus - mu @ mu) / (2 * sigma))
    assert eval_aug_lagrangian(pe, x, m, sigma) == pytest.approx(expected, rel=1e-12, abs=1e-12)
