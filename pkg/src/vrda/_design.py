"""Row-access views over a design matrix.

Solvers only ever touch the data through a handful of primitives: the
margin ``a_i^T x`` of one row, ``out += alpha * a_i`` for one row, and the
two full products ``A x`` / ``A^T w``.  Three storage layouts implement
them: a dense array, a CSR matrix, and a CSR matrix seen through a lazy
per-column affine map (centering and scaling without densifying).
"""
import numpy as np
from scipy import sparse


class DenseRows:
    """Rows of a dense ``(n, d)`` array."""

    def __init__(self, X):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.n, self.d = self.X.shape

    def dot(self, i, x):
        return float(self.X[i] @ x)

    def axpy(self, i, alpha, out):
        out += alpha * self.X[i]

    def matvec(self, x):
        return self.X @ x

    def rmatvec(self, w):
        return self.X.T @ w

    def sq_norms(self):
        return np.einsum("ij,ij->i", self.X, self.X)

    def row(self, i):
        return self.X[i].copy()

    def row_support(self, i):
        return np.flatnonzero(self.X[i])

    def toarray(self):
        return self.X.copy()


class CsrRows:
    """Rows of a CSR matrix, accessed through the raw index arrays."""

    def __init__(self, X):
        X = sparse.csr_matrix(X, dtype=np.float64)
        X.sum_duplicates()
        X.sort_indices()
        self.X = X
        self.n, self.d = X.shape
        self.indptr = X.indptr
        self.indices = X.indices
        self.data = X.data

    def _slice(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def dot(self, i, x):
        idx, val = self._slice(i)
        return float(val @ x[idx])

    def axpy(self, i, alpha, out):
        idx, val = self._slice(i)
        out[idx] += alpha * val

    def matvec(self, x):
        return self.X @ x

    def rmatvec(self, w):
        return self.X.T @ w

    def sq_norms(self):
        return np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel()

    def row(self, i):
        out = np.zeros(self.d)
        idx, val = self._slice(i)
        out[idx] = val
        return out

    def row_support(self, i):
        idx, val = self._slice(i)
        return idx[val != 0]

    def toarray(self):
        return self.X.toarray()


class CenteredSparse:
    """Sparse matrix with a lazy column transform ``(a_ij - mean_j) * scale_j``.

    Constant columns carry ``scale_j = 0`` so they map to zero.  Nothing is
    densified; every primitive folds the shift into one extra dot product
    or one extra dense axpy, which is O(d) like the inner steps anyway.
    """

    def __init__(self, X, mean, scale):
        self.raw = sparse.csr_matrix(X, dtype=np.float64)
        self.raw.sum_duplicates()
        self.raw.sort_indices()
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)
        self.shape = self.raw.shape
        # shift_j = mean_j * scale_j, the dense part of every transformed row
        self.shift = self.mean * self.scale

    def toarray(self):
        return (self.raw.toarray() - self.mean) * self.scale


class CenteredRows:
    def __init__(self, C):
        self.C = C
        self._csr = CsrRows(C.raw)
        self.n, self.d = C.shape
        self.scale = C.scale
        self.shift = C.shift

    def dot(self, i, x):
        xs = self.scale * x
        return self._csr.dot(i, xs) - float(self.C.mean @ xs)

    def axpy(self, i, alpha, out):
        idx, val = self._csr._slice(i)
        out[idx] += alpha * val * self.scale[idx]
        out -= alpha * self.shift

    def matvec(self, x):
        xs = self.scale * x
        return self.C.raw @ xs - float(self.C.mean @ xs)

    def rmatvec(self, w):
        return self.scale * (self.C.raw.T @ w) - self.shift * w.sum()

    def sq_norms(self):
        # ||s*(a - m)||^2 = sum s^2 a^2 - 2 sum s^2 a m + sum s^2 m^2
        s2 = self.scale ** 2
        raw = self.C.raw
        quad = np.asarray(raw.multiply(raw) @ s2).ravel()
        cross = np.asarray(raw @ (s2 * self.C.mean)).ravel()
        return np.maximum(quad - 2.0 * cross + float(s2 @ self.C.mean ** 2), 0.0)

    def row(self, i):
        return self._csr.row(i) * self.scale - self.shift

    def row_support(self, i):
        return np.flatnonzero(self.row(i))

    def toarray(self):
        return self.C.toarray()


def as_rows(X):
    """Wrap an array-like design matrix in the matching row view."""
    if isinstance(X, (DenseRows, CsrRows, CenteredRows)):
        return X
    if isinstance(X, CenteredSparse):
        return CenteredRows(X)
    if sparse.issparse(X):
        return CsrRows(X)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"design matrix must be 2-D, got shape {X.shape}")
    return DenseRows(X)
