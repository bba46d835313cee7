import numpy as np
import pytest

from vrda import CompositeProblem, Regularizer

ACCEPTANCE_LINES = []


def random_problem(rng, n, d, loss="squared", l1=0.0, l2=0.0, sparse_rows=False):
    A = rng.standard_normal((n, d)) * rng.uniform(0.5, 2.0, size=(n, 1))
    if sparse_rows:
        A[rng.random((n, d)) < 0.5] = 0.0
    if loss == "logistic":
        b = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    else:
        b = rng.standard_normal(n)
    return CompositeProblem(A, b, loss, Regularizer(l1, l2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
