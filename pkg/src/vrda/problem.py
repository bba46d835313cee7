"""Composite objectives ``P(x) = (1/n) sum_i f_i(x) + R(x)``.

Every smooth term is a generalized linear loss ``f_i(x) = phi(a_i^T x, b_i)``
so its gradient is a scalar multiple of the data row.  Regularizers are
the elastic-net family, which covers plain lasso, ridge and the
unregularized case.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._design import as_rows

__all__ = [
    "LIPSCHITZ_FLOOR",
    "Sample",
    "SquaredError",
    "Logistic",
    "get_loss",
    "Regularizer",
    "CompositeProblem",
    "loss_value",
    "loss_grad",
    "lipschitz_constant",
    "full_objective",
    "full_gradient",
    "prox",
    "reg_value",
    "soft_threshold",
]

# rows with a_i = 0 would give q_i = 0
LIPSCHITZ_FLOOR = 1e-12


@dataclass(frozen=True)
class Sample:
    """One training example with a sparse feature vector.

    ``indices`` must be strictly increasing and lie in ``[0, dim)``.
    """

    indices: np.ndarray
    values: np.ndarray
    label: float
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be strictly increasing and inside [0, dim)")
        if not np.all(np.isfinite(val)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "label", float(self.label))

    @classmethod
    def from_dense(cls, a, label):
        a = np.asarray(a, dtype=np.float64)
        idx = np.flatnonzero(a)
        return cls(idx, a[idx], label, a.size)

    def margin(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return float(self.values @ x[self.indices])

    def dense(self):
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


class SquaredError:
    """``f(z, b) = (z - b)^2 / 2``."""

    name = "squared"
    # L_i = curvature * ||a_i||^2
    curvature = 1.0

    @staticmethod
    def value(z, b):
        r = np.asarray(z) - b
        return 0.5 * r * r

    @staticmethod
    def deriv(z, b):
        return np.asarray(z) - b

    @staticmethod
    def deriv_scalar(z, b):
        return z - b


class Logistic:
    """``f(z, b) = log(1 + exp(-b z))`` for labels ``b`` in {+1, -1}."""

    name = "logistic"
    curvature = 0.25

    @staticmethod
    def value(z, b):
        return np.logaddexp(0.0, -np.asarray(b) * np.asarray(z))

    @staticmethod
    def deriv(z, b):
        bz = np.asarray(b) * np.asarray(z)
        # -b / (1 + exp(b z)) without overflow in either tail
        e = np.exp(-np.abs(bz))
        sig_neg = np.where(bz >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        return -np.asarray(b) * sig_neg

    @staticmethod
    def deriv_scalar(z, b):
        bz = b * z
        if bz >= 0:
            e = math.exp(-bz)
            return -b * e / (1.0 + e)
        return -b / (1.0 + math.exp(bz))


_LOSSES = {"squared": SquaredError, "logistic": Logistic}


def get_loss(loss):
    """Resolve a loss class from its name (``"squared"``, ``"logistic"``)."""
    if isinstance(loss, str):
        try:
            return _LOSSES[loss.lower()]
        except KeyError:
            raise ValueError(f"unknown loss {loss!r}; expected one of {sorted(_LOSSES)}") from None
    if loss in _LOSSES.values():
        return loss
    raise ValueError(f"unknown loss {loss!r}")


def soft_threshold(y, tau):
    """Coordinatewise ``sign(y) * max(|y| - tau, 0)``; thresholded entries are exactly 0."""
    y = np.asarray(y, dtype=np.float64)
    # y - clip(y) is bit-identical to the sign/max form and yields +0.0 inside the band
    return y - np.minimum(np.maximum(y, -tau), tau)


@dataclass(frozen=True)
class Regularizer:
    """``R(x) = l1 * ||x||_1 + (l2 / 2) * ||x||_2^2``.

    ``l1 = l2 = 0`` is the unregularized case; the strong-convexity modulus
    is ``mu = l2``.
    """

    l1: float = 0.0
    l2: float = 0.0

    def __post_init__(self):
        if not (self.l1 >= 0 and self.l2 >= 0):
            raise ValueError(f"regularization weights must be nonnegative, got l1={self.l1}, l2={self.l2}")
        object.__setattr__(self, "l1", float(self.l1))
        object.__setattr__(self, "l2", float(self.l2))

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def lasso(cls, l1):
        return cls(l1=l1)

    @classmethod
    def ridge(cls, l2):
        return cls(l2=l2)

    @classmethod
    def elastic_net(cls, l1, l2):
        return cls(l1=l1, l2=l2)

    @property
    def kind(self):
        if self.l1 == 0 and self.l2 == 0:
            return "none"
        if self.l2 == 0:
            return "l1"
        if self.l1 == 0:
            return "squared_l2"
        return "elastic_net"

    @property
    def mu(self):
        return self.l2

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = 0.0
        if self.l1:
            out += self.l1 * float(np.abs(x).sum())
        if self.l2:
            out += 0.5 * self.l2 * float(x @ x)
        return out

    def prox(self, y, c):
        """``argmin_x 0.5 ||x - y||^2 + c R(x)`` for ``c > 0``."""
        if not c > 0:
            raise ValueError(f"prox scale must be positive, got {c}")
        y = np.asarray(y, dtype=np.float64)
        out = soft_threshold(y, c * self.l1) if self.l1 else y.copy()
        if self.l2:
            out /= 1.0 + c * self.l2
        return out

    def subgradient(self, x):
        """One element of the subdifferential, choosing 0 on the l1 kink."""
        x = np.asarray(x, dtype=np.float64)
        return self.l1 * np.sign(x) + self.l2 * x


class CompositeProblem:
    """Regularized empirical risk ``P(x) = F(x) + R(x)`` over a fixed dataset.

    Parameters
    ----------
    X : array_like, scipy.sparse matrix or CenteredSparse, shape (n, d)
        Feature rows ``a_i``.
    b : array_like, shape (n,)
        Labels.  Logistic loss needs labels in {+1, -1}.
    loss : str or loss class
    reg : Regularizer, optional

    Attributes
    ----------
    lipschitz : ndarray, shape (n,)
        Per-sample smoothness constants, floored at ``LIPSCHITZ_FLOOR``.
    lbar, lmax : float
        Mean and max of ``lipschitz``.
    """

    def __init__(self, X, b, loss="squared", reg=None):
        self.rows = as_rows(X)
        self.n, self.d = self.rows.n, self.rows.d
        if self.n < 1:
            raise ValueError("problem needs at least one sample")
        self.b = np.asarray(b, dtype=np.float64).ravel()
        if self.b.shape != (self.n,):
            raise ValueError(f"expected {self.n} labels, got {self.b.shape[0]}")
        self.loss = get_loss(loss)
        if self.loss is Logistic and not np.all(np.abs(self.b) == 1.0):
            raise ValueError("logistic loss needs labels in {+1, -1}")
        self.reg = reg if reg is not None else Regularizer()
        raw = self.loss.curvature * self.rows.sq_norms()
        self.lipschitz = np.maximum(raw, LIPSCHITZ_FLOOR)
        self.lbar = float(self.lipschitz.mean())
        self.lmax = float(self.lipschitz.max())

    @property
    def mu(self):
        return self.reg.mu

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x

    def sample(self, i):
        row = self.rows.row(i)
        return Sample.from_dense(row, self.b[i])

    def margins(self, x):
        return self.rows.matvec(self._check(x))

    def derivs(self, x):
        """Loss derivative ``phi'(a_i^T x, b_i)`` for every sample."""
        return self.loss.deriv(self.margins(x), self.b)

    def sample_derivs(self, x):
        """Per-sample derivatives through the same scalar path as :meth:`sample_deriv`.

        Slower than :meth:`derivs` but bit-identical to the inner-loop
        evaluations, so correction terms vanish exactly at the anchor.
        """
        x = self._check(x)
        dot, deriv, b = self.rows.dot, self.loss.deriv_scalar, self.b
        return np.array([deriv(dot(i, x), b[i]) for i in range(self.n)])

    def sample_deriv(self, i, x):
        return self.loss.deriv_scalar(self.rows.dot(i, x), self.b[i])

    def sample_grad(self, i, x):
        out = np.zeros(self.d)
        self.rows.axpy(i, self.sample_deriv(i, x), out)
        return out

    def smooth_value(self, x):
        return float(np.mean(self.loss.value(self.margins(x), self.b)))

    def value(self, x):
        x = self._check(x)
        return self.smooth_value(x) + self.reg.value(x)

    def grad(self, x):
        """Gradient of the smooth part; costs ``n`` sample gradients."""
        return self.rows.rmatvec(self.derivs(x)) / self.n

    def grad_from_derivs(self, derivs):
        return self.rows.rmatvec(np.asarray(derivs, dtype=np.float64)) / self.n

    def prox(self, y, c):
        return self.reg.prox(y, c)


def loss_value(loss, sample, x):
    loss = get_loss(loss)
    return float(loss.value(sample.margin(x), sample.label))


def loss_grad(loss, sample, x):
    """Gradient of one sample's loss, supported on the sample's nonzeros."""
    loss = get_loss(loss)
    g = float(loss.deriv(sample.margin(x), sample.label))
    out = np.zeros(sample.dim)
    out[sample.indices] = g * sample.values
    return out


def lipschitz_constant(loss, sample):
    """Smoothness constant of one sample's loss, before flooring."""
    loss = get_loss(loss)
    return loss.curvature * float(sample.values @ sample.values)


def full_objective(problem, x):
    return problem.value(x)


def full_gradient(problem, x):
    return problem.grad(problem._check(x))


def prox(reg, y, c):
    return reg.prox(y, c)


def reg_value(reg, x):
    return reg.value(x)
