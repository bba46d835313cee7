import math

import numpy as np
import pytest

from vrda import CompositeProblem, Regularizer, compute_reference
from vrda.estimators import SagaTable, SvrgAnchor
from vrda.optimizers import (
    ConfigError,
    SolverConfig,
    StageState,
    default_alpha,
    default_m1,
    prox_gd_run,
    prox_sgd_run,
    rda_run,
    sada_inner_step,
    sada_run,
    saga_run,
    stage_length,
    svrda_inner_step,
    svrda_run,
    svrg_run,
)
from vrda.sampling import build_q
from vrda.trace import nnz

from conftest import random_problem


# --- schedule helpers --------------------------------------------------------

def test_stage_length_examples():
    assert stage_length(32, 7, 0.1) == 32
    assert stage_length(4, 3, 0.0) == 16
    assert stage_length(4, 1, 0.0) == 4
    with pytest.raises(ConfigError):
        stage_length(4, 80, 0.0)
    with pytest.raises(ValueError):
        stage_length(4, 0, 0.0)


def test_default_alpha_examples():
    assert default_alpha(1e-4) == 0.25
    assert default_alpha(0.0) == 0.0
    assert default_alpha(0.0, 0.5) == 0.5 and default_alpha(3.0, 0.5) == 0.5
    with pytest.raises(ConfigError):
        default_alpha(1.0, 1.5)


def test_default_m1():
    assert default_m1(4.0, 0.5, 100) == 4
    assert default_m1(4.0, 0.3, 100) == 7
    assert default_m1(4.0, 0.0, 100) == 100
    # exact integer ratio up to rounding is not bumped
    assert default_m1(0.1 * 3 * 2, 0.1, 5) == 3


def test_config_errors(rng):
    p = random_problem(rng, 4, 3, l1=0.1)
    with pytest.raises(ConfigError):
        svrda_run(p, SolverConfig(stages=1, eta=p.lbar))
    with pytest.raises(ConfigError):
        sada_run(p, SolverConfig(stages=1, eta=p.lmax))
    with pytest.raises(ConfigError):
        svrda_run(p, SolverConfig(stages=1, output="v"))
    with pytest.raises(ConfigError):
        svrda_run(p, SolverConfig(stages=1, m1=0))
    with pytest.raises(ConfigError):
        svrda_run(p, SolverConfig())
    with pytest.raises(ConfigError):
        svrda_run(p, SolverConfig(stages=1, x0=np.zeros(5)))


# --- straight-line oracle ----------------------------------------------------

def naive_prox(y, c, l1, l2):
    out = []
    for v in y:
        if v > c * l1:
            s = v - c * l1
        elif v < -c * l1:
            s = v + c * l1
        else:
            s = 0.0
        out.append(s / (1 + c * l2))
    return np.array(out)


def naive_grad_i(A, b, i, x):
    return A[i] * (A[i] @ x - b[i])


def naive_dual_averaging(A, b, l1, l2, x_tilde, v_tilde, alpha, eta, indices, estimator):
    v0 = (1 - alpha) * v_tilde + alpha * x_tilde
    u = v0.copy()
    gsum = np.zeros_like(u)
    xs, vs, us = [], [], []
    for t, i in enumerate(indices, start=1):
        g = estimator(i, u)
        gsum = gsum + g
        gbar = gsum / t
        v = naive_prox(v0 - (t / eta) * gbar, t / eta, l1, l2)
        x = naive_prox(u - g / (eta * t), 1 / (eta * t), l1, l2)
        u = (1 - 1 / (t + 1)) * x + (1 / (t + 1)) * v
        xs.append(x)
        vs.append(v)
        us.append(u)
    return xs, vs, us


SCRIPT = [1, 0, 1]


def _tiny_problem():
    A = np.array([[1.0, 2.0], [-0.5, 1.5]])
    b = np.array([1.0, -2.0])
    return A, b, 0.3, 0.2


def test_svrda_three_steps_match_oracle():
    A, b, l1, l2 = _tiny_problem()
    p = CompositeProblem(A, b, "squared", Regularizer(l1, l2))
    x_tilde, v_tilde = np.array([0.5, -1.0]), np.array([1.0, 0.25])
    alpha, eta = 0.25, 4 * p.lbar
    L = np.array([A[i] @ A[i] for i in range(2)])
    q = L / L.sum()
    full0 = (naive_grad_i(A, b, 0, x_tilde) + naive_grad_i(A, b, 1, x_tilde)) / 2

    def est(i, u):
        return (naive_grad_i(A, b, i, u) - naive_grad_i(A, b, i, x_tilde)) / (2 * q[i]) + full0

    xs, vs, us = naive_dual_averaging(A, b, l1, l2, x_tilde, v_tilde, alpha, eta, SCRIPT, est)
    state = StageState.start(x_tilde, v_tilde, alpha)
    anchor = SvrgAnchor(p, x_tilde)
    dist = build_q(p.lipschitz)
    for k, i in enumerate(SCRIPT):
        svrda_inner_step(state, anchor, i, eta, p, dist)
        np.testing.assert_allclose(state.x, xs[k], rtol=0, atol=1e-12)
        np.testing.assert_allclose(state.v, vs[k], rtol=0, atol=1e-12)
        np.testing.assert_allclose(state.u, us[k], rtol=0, atol=1e-12)


def test_sada_three_steps_match_oracle():
    A, b, l1, l2 = _tiny_problem()
    p = CompositeProblem(A, b, "squared", Regularizer(l1, l2))
    x_tilde, v_tilde = np.array([0.5, -1.0]), np.array([1.0, 0.25])
    alpha, eta = 0.25, 5 * p.lmax
    phi = [x_tilde.copy(), x_tilde.copy()]

    def est(i, u):
        mean = (naive_grad_i(A, b, 0, phi[0]) + naive_grad_i(A, b, 1, phi[1])) / 2
        g = naive_grad_i(A, b, i, u) - naive_grad_i(A, b, i, phi[i]) + mean
        phi[i] = u.copy()
        return g

    xs, vs, us = naive_dual_averaging(A, b, l1, l2, x_tilde, v_tilde, alpha, eta, SCRIPT, est)
    state = StageState.start(x_tilde, v_tilde, alpha)
    table = SagaTable(p, x_tilde)
    for k, i in enumerate(SCRIPT):
        sada_inner_step(state, table, i, eta, p)
        np.testing.assert_allclose(state.x, xs[k], rtol=0, atol=1e-12)
        np.testing.assert_allclose(state.v, vs[k], rtol=0, atol=1e-12)


def test_first_step_single_sample_unregularized(rng):
    p = random_problem(rng, 1, 3)
    eta = 4 * p.lbar
    x_tilde = rng.standard_normal(3)
    state = StageState.start(x_tilde, x_tilde, 0.0)
    svrda_inner_step(state, SvrgAnchor(p, x_tilde), 0, eta, p, build_q(p.lipschitz))
    expected = x_tilde - p.grad(x_tilde) / eta
    np.testing.assert_allclose(state.x, expected, rtol=1e-14, atol=1e-14)
    np.testing.assert_array_equal(state.x, state.v)


def test_stationary_anchor_at_optimum(rng):
    A = rng.standard_normal((6, 3))
    b = rng.standard_normal(6)
    p = CompositeProblem(A, b)
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    res = svrda_run(p, SolverConfig(m1=1, stages=1, x0=x_star))
    np.testing.assert_allclose(res.x_tilde, x_star, atol=1e-12)
    state = StageState.start(x_star, x_star, 0.0)
    anchor = SvrgAnchor(p, x_star)
    q = build_q(p.lipschitz)
    for i in range(6):
        svrda_inner_step(state, anchor, i, 4 * p.lbar, p, q)
    np.testing.assert_allclose(state.x, x_star, atol=1e-12)


def test_coupling_identity_and_argmin_form(rng):
    p = random_problem(rng, 10, 5, "logistic", l1=0.05, l2=0.02)
    eta = 4 * p.lbar
    q = build_q(p.lipschitz)
    x_tilde = rng.standard_normal(5)
    state = StageState.start(x_tilde, rng.standard_normal(5), 0.25)
    anchor = SvrgAnchor(p, x_tilde)
    for _ in range(40):
        svrda_inner_step(state, anchor, int(rng.integers(10)), eta, p, q)
        t = state.t
        coupled = (1.0 - 1.0 / (t + 1)) * state.x + (1.0 / (t + 1)) * state.v
        assert np.linalg.norm(state.u - coupled) == 0.0

        def obj(z):
            return state.gbar.value @ z + p.reg.value(z) + eta / (2 * t) * np.sum((z - state.v0) ** 2)

        base = obj(state.v)
        for _ in range(20):
            assert base <= obj(state.v + rng.standard_normal(5) * rng.choice([1e-5, 1e-2, 1.0])) + 1e-12


# --- per-stage bounds with zero estimator variance ---------------------------

def _one_sample(loss, l1, l2, seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((1, 4)) * 1.5
    b = [1.0] if loss == "logistic" else r.standard_normal(1)
    return CompositeProblem(a, b, loss, Regularizer(l1, l2))


@pytest.mark.parametrize("run,eta_of", [(svrda_run, lambda p: 4 * p.lbar), (sada_run, lambda p: 5 * p.lmax)])
@pytest.mark.parametrize("loss,l1,l2", [("squared", 0.2, 0.3), ("logistic", 0.05, 0.1), ("squared", 0.2, 0.0)])
def test_stage_recursion_single_sample(run, eta_of, loss, l1, l2):
    p = _one_sample(loss, l1, l2, 3)
    x_star, p_star = compute_reference(p, tol=1e-14)
    x0 = np.array([2.0, -1.0, 0.5, 3.0])
    S = 8 if l2 > 0 else 6
    res = run(p, SolverConfig(stages=S, x0=x0, m1=None if l2 > 0 else 2))
    eta, m1, alpha, mu = eta_of(p), res.trace.metadata["m1"], res.trace.metadata["alpha"], p.mu
    for s in range(1, S + 1):
        m = stage_length(m1, s, mu)
        dx = np.sum((res.stage_x[s - 1] - x_star) ** 2)
        dv_prev = np.sum((res.stage_v[s - 1] - x_star) ** 2)
        dv = np.sum((res.stage_v[s] - x_star) ** 2)
        lhs = p.value(res.stage_x[s]) - p_star + (eta + m * mu) / (2 * m) * dv
        rhs = (0.5 * (p.value(res.stage_x[s - 1]) - p_star) + (alpha * eta / (2 * m) - mu / 4) * dx
               + (1 - alpha) * eta / (2 * m) * dv_prev)
        assert lhs <= rhs + 1e-9, (s, lhs, rhs)


def test_sada_matches_svrda_for_single_sample():
    p = _one_sample("logistic", 0.05, 0.1, 4)
    cfg = SolverConfig(stages=4, eta=6 * p.lmax, x0=np.ones(4))
    a, b = svrda_run(p, cfg), sada_run(p, cfg)
    for xa, xb in zip(a.stage_x, b.stage_x):
        np.testing.assert_allclose(xa, xb, rtol=1e-12, atol=1e-14)
    for va, vb in zip(a.stage_v, b.stage_v):
        np.testing.assert_allclose(va, vb, rtol=1e-12, atol=1e-14)


# --- run-level behaviour -----------------------------------------------------

def test_schedule_arithmetic_and_accounting(rng):
    p = random_problem(rng, 5, 3, l1=0.1)
    res = sada_run(p, SolverConfig(m1=4, stages=3))
    assert res.total_grad_evals == 3 * 5 + (4 + 8 + 16)
    assert res.stage_evals == [0, 9, 22, 43]
    res = svrda_run(p, SolverConfig(m1=4, stages=3))
    assert res.total_grad_evals == 3 * 5 + 2 * (4 + 8 + 16)


def test_budget_is_never_exceeded(rng):
    p = random_problem(rng, 20, 4, l1=0.1)
    for run in (svrda_run, sada_run, svrg_run):
        res = run(p, SolverConfig(max_grad_evals=333))
        assert res.total_grad_evals <= 333
        assert res.trace.rows[-1].grad_evals == res.total_grad_evals
    for run in (prox_gd_run, prox_sgd_run, rda_run, saga_run):
        assert run(p, SolverConfig(max_grad_evals=333)).total_grad_evals <= 333


def test_saga_table_at_stage_start(rng):
    p = random_problem(rng, 6, 3, "logistic")
    x = rng.standard_normal(3)
    table = SagaTable(p, x)
    for i in range(6):
        np.testing.assert_allclose(table.stored_grad(i), p.sample_grad(i, x), rtol=1e-15, atol=1e-16)
    np.testing.assert_allclose(table.mean_grad, p.grad(x), rtol=1e-14, atol=1e-15)


def test_trace_monotone_and_metadata(rng):
    p = random_problem(rng, 30, 5, l1=0.05)
    res = svrda_run(p, SolverConfig(stages=4, checkpoint_every=7))
    evals = res.trace.column("grad_evals")
    assert evals[0] == 0 and np.all(np.diff(evals) > 0)
    assert res.trace.metadata["v_tilde_guaranteed"] is False
    assert res.trace.guaranteed_output == "x_tilde"
    p2 = random_problem(rng, 30, 5, l1=0.05, l2=0.1)
    res = svrda_run(p2, SolverConfig(stages=2, output="v"))
    assert res.trace.metadata["v_tilde_guaranteed"] is True
    assert res.output is res.v_tilde


def test_trace_nnz_matches_iterates(rng):
    p = random_problem(rng, 40, 12, l1=0.3, sparse_rows=True)
    res = svrda_run(p, SolverConfig(stages=5, keep_iterates=True, checkpoint_every=10))
    assert len(res.trace.iterates) == len(res.trace.rows)
    for row, x in zip(res.trace.rows, res.trace.iterates):
        assert row.nnz == int(np.sum(x != 0))
        assert row.objective_gap == p.value(x)
    stage_ends = [r for r in res.trace.rows if r.grad_evals in res.stage_evals[1:]]
    assert [r.nnz for r in stage_ends] == [nnz(x) for x in res.stage_x[1:]]


@pytest.mark.parametrize("run", [svrda_run, sada_run, svrg_run, saga_run, prox_sgd_run, rda_run, prox_gd_run])
def test_determinism(run, rng):
    p = random_problem(rng, 25, 6, "logistic", l1=0.02)
    cfg = SolverConfig(seed=42, max_grad_evals=600, checkpoint_every=50)
    a, b = run(p, cfg), run(p, cfg)
    assert a.trace.to_csv() == b.trace.to_csv()
    np.testing.assert_array_equal(a.x_tilde, b.x_tilde)
    c = run(p, cfg.updated(seed=43))
    if run is not prox_gd_run:
        assert not np.array_equal(a.x_tilde, c.x_tilde)


def test_prox_gd_examples(rng):
    p = CompositeProblem(np.array([[1.0]]), [0.0])
    res = prox_gd_run(p, SolverConfig(eta=1.0, iterations=1, x0=np.array([7.5])))
    assert res.x_tilde.tolist() == [0.0]
    A, b = rng.standard_normal((5, 2)), rng.standard_normal(5)
    p = CompositeProblem(A, b)
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    np.testing.assert_allclose(prox_gd_run(p, SolverConfig(iterations=5, x0=x_star)).x_tilde, x_star, atol=1e-13)


def test_prox_gd_monotone(rng):
    p = random_problem(rng, 30, 8, l1=0.1)
    res = prox_gd_run(p, SolverConfig(iterations=1000, checkpoint_every=p.n))
    vals = res.trace.column("objective_gap")
    assert len(vals) == 1001
    assert np.all(np.diff(vals) <= 1e-14)


def test_sgd_single_sample_is_gd_stream(rng):
    p = random_problem(rng, 1, 3)
    x0 = rng.standard_normal(3)
    res = prox_sgd_run(p, SolverConfig(iterations=10, x0=x0, keep_iterates=True, checkpoint_every=1))
    x = x0.copy()
    for t in range(1, 11):
        x = x - p.grad(x) / (p.lmax * math.sqrt(t))
        np.testing.assert_allclose(res.trace.iterates[t], x, rtol=1e-13, atol=1e-14)


def test_rda_zero_gradients_soft_threshold():
    p = CompositeProblem(np.zeros((3, 4)), np.zeros(3), reg=Regularizer(l1=0.5))
    x0 = np.array([3.0, -1.2, 0.4, -2.0])
    res = rda_run(p, SolverConfig(eta=1.0, iterations=8, x0=x0, keep_iterates=True, checkpoint_every=1))
    for t in range(1, 9):
        c = math.sqrt(t)
        expected = np.sign(x0) * np.maximum(np.abs(x0) - 0.5 * c, 0.0)
        np.testing.assert_allclose(res.trace.iterates[t], expected, rtol=1e-15)


def test_svrg_single_sample_averages_gd(rng):
    p = random_problem(rng, 1, 3, l1=0.1)
    x0 = rng.standard_normal(3)
    res = svrg_run(p, SolverConfig(stages=1, m1=5, x0=x0))
    eta = 4 * p.lbar
    x, xs = x0.copy(), []
    for _ in range(5):
        x = p.prox(x - p.grad(x) / eta, 1 / eta)
        xs.append(x)
    np.testing.assert_allclose(res.x_tilde, np.mean(xs, axis=0), rtol=1e-12, atol=1e-14)


def test_saga_output_sparsity(rng):
    p = random_problem(rng, 60, 10, l1=0.3, l2=0.1)
    res = saga_run(p, SolverConfig(iterations=3000))
    assert res.trace.guaranteed_output == "last"
    assert nnz(res.x_tilde) < 10
    p0 = random_problem(rng, 60, 10, l1=0.05)
    x_star, _ = compute_reference(p0)
    assert 0 < nnz(x_star) < 10
    res = saga_run(p0, SolverConfig(iterations=3000, x0=np.ones(10)))
    assert res.trace.guaranteed_output == "average"
    assert nnz(res.x_tilde) == 10
