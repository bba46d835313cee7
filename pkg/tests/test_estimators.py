import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vrda import compute_reference
from vrda.estimators import (
    RunningAverage,
    SagaTable,
    SvrgAnchor,
    running_average_push,
    saga_estimate_and_update,
    svrg_estimate,
)
from vrda.sampling import build_q

from conftest import random_problem


def grad_i(p, i, x):
    return p.sample_grad(i, x)


# --- SVRG -------------------------------------------------------------------

def test_svrg_at_anchor_is_full_gradient(rng):
    p = random_problem(rng, 5, 3, "logistic")
    x0 = rng.standard_normal(3)
    anchor = SvrgAnchor(p, x0)
    np.testing.assert_allclose(anchor.full_grad, p.grad(x0), rtol=1e-14, atol=1e-15)
    q = build_q(p.lipschitz)
    for i in range(5):
        np.testing.assert_array_equal(svrg_estimate(anchor, i, x0, q.weights[i], p), anchor.full_grad)


def test_svrg_single_sample_collapses(rng):
    p = random_problem(rng, 1, 4, "squared", l1=0.1)
    anchor = SvrgAnchor(p, rng.standard_normal(4))
    u = rng.standard_normal(4)
    np.testing.assert_allclose(svrg_estimate(anchor, 0, u, 1.0, p), p.grad(u), rtol=1e-14, atol=1e-14)


def test_svrg_rejects_zero_probability(rng):
    p = random_problem(rng, 2, 2)
    anchor = SvrgAnchor(p, np.zeros(2))
    with pytest.raises(ValueError):
        svrg_estimate(anchor, 0, np.ones(2), 0.0, p)


def test_anchor_is_read_only(rng):
    p = random_problem(rng, 3, 2)
    anchor = SvrgAnchor(p, np.ones(2))
    with pytest.raises(ValueError):
        anchor.full_grad[0] = 1.0


@pytest.mark.parametrize("n", [2, 5, 16])
@pytest.mark.parametrize("loss", ["squared", "logistic"])
def test_svrg_unbiased_by_enumeration(n, loss, rng):
    p = random_problem(rng, n, 4, loss, sparse_rows=True)
    q = build_q(p.lipschitz)
    anchor = SvrgAnchor(p, rng.standard_normal(4))
    u = rng.standard_normal(4)
    mean = sum(q.weights[i] * svrg_estimate(anchor, i, u, q.weights[i], p) for i in range(n))
    np.testing.assert_allclose(mean, p.grad(u), rtol=0, atol=1e-12)


def test_svrg_zero_variance_at_anchor(rng):
    p = random_problem(rng, 6, 3, "logistic")
    q = build_q(p.lipschitz)
    x0 = rng.standard_normal(3)
    anchor = SvrgAnchor(p, x0)
    var = sum(q.weights[i] * np.sum((svrg_estimate(anchor, i, x0, q.weights[i], p) - anchor.full_grad) ** 2)
              for i in range(6))
    assert var == 0.0


# --- SAGA -------------------------------------------------------------------

@pytest.mark.parametrize("storage", ["scalar", "dense"])
def test_saga_at_table_point(storage, rng):
    p = random_problem(rng, 4, 3, "logistic")
    phi = rng.standard_normal(3)
    table = SagaTable(p, phi, storage)
    mean0 = table.mean_grad.copy()
    derivs0 = table.derivs.copy()
    g = saga_estimate_and_update(table, 2, phi, p)
    np.testing.assert_allclose(g, mean0, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(table.derivs, derivs0)
    np.testing.assert_allclose(table.mean_grad, mean0, rtol=0, atol=1e-15)


def test_saga_single_sample_collapses(rng):
    p = random_problem(rng, 1, 3)
    table = SagaTable(p, rng.standard_normal(3))
    u = rng.standard_normal(3)
    np.testing.assert_allclose(saga_estimate_and_update(table, 0, u, p), grad_i(p, 0, u), rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("n", [3, 9, 16])
@pytest.mark.parametrize("storage", ["scalar", "dense"])
def test_saga_unbiased_by_enumeration(n, storage, rng):
    p = random_problem(rng, n, 4, "logistic", sparse_rows=True)
    base = SagaTable(p, np.zeros(4), storage)
    # scatter the table points so each phi_i differs
    for i in range(n):
        saga_estimate_and_update(base, i, rng.standard_normal(4), p)
    u = rng.standard_normal(4)
    outs = []
    for i in range(n):
        t = SagaTable(p, np.zeros(4), storage)
        t.derivs[:] = base.derivs
        if storage == "dense":
            t.grads[:] = base.grads
        t.mean_grad = base.mean_grad.copy()
        outs.append(saga_estimate_and_update(t, i, u, p))
    np.testing.assert_allclose(np.mean(outs, axis=0), p.grad(u), rtol=0, atol=1e-12)


def test_saga_zero_variance_when_table_at_u(rng):
    p = random_problem(rng, 5, 3)
    u = rng.standard_normal(3)
    for i in range(5):
        table = SagaTable(p, u)
        assert np.sum((saga_estimate_and_update(table, i, u, p) - table.mean_grad) ** 2) == 0.0


@pytest.mark.parametrize("storage", ["scalar", "dense"])
def test_saga_table_audit(storage, rng):
    n = 12
    p = random_problem(rng, n, 5, "logistic", sparse_rows=True)
    table = SagaTable(p, np.zeros(5), storage)
    table._since_refresh = -10 * n  # suppress the periodic refresh for this audit
    for _ in range(10 * n):
        saga_estimate_and_update(table, int(rng.integers(n)), rng.standard_normal(5) * 3, p)
    recomputed = np.mean([table.stored_grad(i) for i in range(n)], axis=0)
    np.testing.assert_allclose(table.mean_grad, recomputed, rtol=1e-10, atol=1e-14)


def test_saga_storage_modes_agree(rng):
    p = random_problem(rng, 7, 4, "squared", sparse_rows=True)
    a, b = SagaTable(p, np.ones(4), "scalar"), SagaTable(p, np.ones(4), "dense")
    for _ in range(50):
        i, u = int(rng.integers(7)), rng.standard_normal(4)
        np.testing.assert_allclose(saga_estimate_and_update(a, i, u, p), saga_estimate_and_update(b, i, u, p),
                                   rtol=1e-12, atol=1e-12)


def test_saga_bad_storage(rng):
    with pytest.raises(ValueError):
        SagaTable(random_problem(rng, 2, 2), np.zeros(2), "sparse")


# --- lemmas -----------------------------------------------------------------

def _weighted_spread(p, q, x, y):
    return sum(np.sum((grad_i(p, i, x) - grad_i(p, i, y)) ** 2) / (p.n * q.weights[i]) for i in range(p.n)) / p.n


@pytest.mark.parametrize("loss,l1,l2", [("squared", 0.1, 0.0), ("logistic", 0.05, 0.1), ("squared", 0.0, 0.3)])
def test_objective_bound_lemma(loss, l1, l2, rng):
    p = random_problem(rng, 8, 4, loss, l1=l1, l2=l2)
    q = build_q(p.lipschitz)
    x_star, p_star = compute_reference(p, tol=1e-13)
    for _ in range(100):
        x = x_star + rng.standard_normal(4) * rng.choice([0.01, 1.0, 5.0])
        lhs = _weighted_spread(p, q, x, x_star)
        rhs = 2 * p.lbar * (p.value(x) - p_star - 0.5 * p.mu * np.sum((x - x_star) ** 2))
        assert lhs <= rhs + 1e-8


@pytest.mark.parametrize("loss", ["squared", "logistic"])
def test_smoothness_lemma(loss, rng):
    p = random_problem(rng, 6, 3, loss, l1=0.2, l2=0.1)
    q = build_q(p.lipschitz)
    for _ in range(200):
        x, u = rng.standard_normal(3) * 2, rng.standard_normal(3) * 2
        lhs = p.smooth_value(u) + p.grad(u) @ (x - u) + p.reg.value(x)
        rhs = p.value(x) - _weighted_spread(p, q, x, u) / (2 * p.lbar)
        assert lhs <= rhs + 1e-8


# --- running average --------------------------------------------------------

def test_running_average_examples():
    g = np.array([2.0, -1.0])
    a = RunningAverage(2)
    np.testing.assert_array_equal(running_average_push(a, g).value, g)
    np.testing.assert_array_equal(a.push(g).value, g)
    b = RunningAverage(1)
    for v in (1.0, 3.0, 5.0):
        b.push(np.array([v]))
    assert b.value.tolist() == [3.0] and b.count == 3


@settings(max_examples=200, deadline=None)
@given(st.lists(arrays(np.float64, 3, elements=st.floats(-1e3, 1e3)), min_size=1, max_size=60))
def test_running_average_matches_naive_mean(gs):
    avg = RunningAverage(3)
    for t, g in enumerate(gs, start=1):
        avg.push(g)
        naive = np.sum(gs[:t], axis=0) / t
        scale = max(1.0, float(np.max(np.abs(gs[:t]))))
        assert np.max(np.abs(avg.value - naive)) <= 1e-10 * scale
