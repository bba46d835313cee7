"""Variance-reduced gradient estimators and the running gradient average.

Gradient-evaluation accounting used throughout the package:

* building an :class:`SvrgAnchor` or filling a :class:`SagaTable` costs ``n``;
* one :func:`svrg_estimate` costs 2 (fresh gradient at ``u`` and at the anchor);
* one :func:`saga_estimate_and_update` costs 1 (the old gradient is stored).
"""
import numpy as np

__all__ = [
    "SVRG_EVALS_PER_STEP",
    "SAGA_EVALS_PER_STEP",
    "SvrgAnchor",
    "SagaTable",
    "RunningAverage",
    "svrg_estimate",
    "saga_estimate_and_update",
    "running_average_push",
]

SVRG_EVALS_PER_STEP = 2
SAGA_EVALS_PER_STEP = 1


class SvrgAnchor:
    """Snapshot point ``x0`` with its cached full gradient.

    The per-sample loss derivatives at ``x0`` are kept as well, so the
    anchor term ``grad f_i(x0)`` is a scalar times row ``i``.
    """

    def __init__(self, problem, point):
        self.point = np.array(point, dtype=np.float64)
        self.derivs = problem.sample_derivs(self.point)
        self.full_grad = problem.grad_from_derivs(self.derivs)
        self.full_grad.setflags(write=False)
        self.point.setflags(write=False)


def svrg_estimate(anchor, i, u, q_i, problem):
    """``(grad f_i(u) - grad f_i(x0)) / (n q_i) + grad F(x0)``."""
    if not q_i > 0:
        raise ValueError(f"sampling probability must be positive, got {q_i}")
    coef = (problem.sample_deriv(i, u) - anchor.derivs[i]) / (problem.n * q_i)
    g = anchor.full_grad.copy()
    problem.rows.axpy(i, coef, g)
    return g


class SagaTable:
    """Gradient memory ``phi_i`` with the running mean of the stored gradients.

    With ``storage="scalar"`` (default) each entry is the loss derivative at
    ``phi_i``, enough for linear models since ``grad f_i(phi_i) = deriv_i * a_i``.
    ``storage="dense"`` keeps the full ``(n, d)`` gradient table instead.

    The mean is updated incrementally and recomputed from scratch every
    ``n`` updates to keep floating-point drift bounded.
    """

    def __init__(self, problem, point, storage="scalar"):
        if storage not in ("scalar", "dense"):
            raise ValueError(f"storage must be 'scalar' or 'dense', got {storage!r}")
        self.problem = problem
        self.storage = storage
        self.n = problem.n
        self.derivs = problem.sample_derivs(np.asarray(point, dtype=np.float64))
        if storage == "dense":
            rows = problem.rows
            self.grads = np.stack([self.derivs[i] * rows.row(i) for i in range(self.n)])
        self.mean_grad = self._recompute()
        self._since_refresh = 0

    def _recompute(self):
        if self.storage == "dense":
            return self.grads.mean(axis=0)
        return self.problem.grad_from_derivs(self.derivs)

    def stored_grad(self, i):
        if self.storage == "dense":
            return self.grads[i].copy()
        out = np.zeros(self.problem.d)
        self.problem.rows.axpy(i, self.derivs[i], out)
        return out

    def refresh(self):
        self.mean_grad = self._recompute()
        self._since_refresh = 0


def saga_estimate_and_update(table, i, u, problem):
    """Return ``grad f_i(u) - grad f_i(phi_i) + mean_j grad f_j(phi_j)``, then set ``phi_i = u``."""
    new = problem.sample_deriv(i, u)
    delta = new - table.derivs[i]
    g = table.mean_grad.copy()
    if table.storage == "dense":
        fresh = new * problem.rows.row(i)
        diff = fresh - table.grads[i]
        g += diff
        table.grads[i] = fresh
        table.mean_grad += diff / table.n
    else:
        problem.rows.axpy(i, delta, g)
        problem.rows.axpy(i, delta / table.n, table.mean_grad)
    table.derivs[i] = new
    table._since_refresh += 1
    if table._since_refresh >= table.n:
        table.refresh()
    return g


class RunningAverage:
    """``value_t = (1 - 1/t) value_{t-1} + g_t / t``, i.e. the mean of all pushes."""

    def __init__(self, d):
        self.value = np.zeros(d)
        self.count = 0

    def push(self, g):
        self.count += 1
        t = self.count
        self.value = (1.0 - 1.0 / t) * self.value + (1.0 / t) * g
        return self


def running_average_push(avg, g):
    return avg.push(g)
