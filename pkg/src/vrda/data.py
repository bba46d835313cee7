"""Datasets: libsvm text parsing, feature standardization, synthetic problems."""
import io
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ._design import CenteredSparse

__all__ = [
    "LibsvmParseError",
    "Dataset",
    "NormalizationMeta",
    "SyntheticSpec",
    "parse_libsvm",
    "load_libsvm",
    "dump_libsvm",
    "normalize_features",
    "generate_synthetic",
]

DENSE_THRESHOLD = 0.5


class LibsvmParseError(ValueError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class NormalizationMeta:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray


@dataclass
class Dataset:
    """Feature matrix plus labels.

    ``X`` is a CSR matrix, a dense array, or a :class:`CenteredSparse`
    view when standardization was applied lazily.
    """

    X: object
    y: np.ndarray
    normalization_meta: NormalizationMeta = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        n, d = self.X.shape
        if n < 1:
            raise ValueError("dataset has no samples")
        if self.y.shape != (n,):
            raise ValueError(f"{n} rows but {self.y.size} labels")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def toarray(self):
        X = self.X
        if isinstance(X, np.ndarray):
            return X.copy()
        return X.toarray()


def _read_text(source):
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    text = source.read()
    return text.decode("utf-8") if isinstance(text, bytes) else text


def parse_libsvm(source, n_features=None, binary=False):
    """Parse libsvm/svmlight text ``<label> <idx>:<val> ...`` (1-based indices).

    Parameters
    ----------
    source : str, bytes or file-like
        The text itself or an open stream.  Use :func:`load_libsvm` for paths.
    n_features : int, optional
        Dimension; inferred as the largest index when omitted.
    binary : bool
        Require labels in {+1, -1}; {0, 1} is accepted and 0 becomes -1.

    Raises
    ------
    LibsvmParseError
        Malformed tokens, non-ascending or non-positive indices, bad labels,
        or an input with no samples.
    """
    text = _read_text(source)
    indptr, indices, values, labels = [0], [], [], []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(lineno, f"bad label {tokens[0]!r}") from None
        if not np.isfinite(label):
            raise LibsvmParseError(lineno, f"label {tokens[0]!r} is not finite")
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(lineno, f"expected <index>:<value>, got {tok!r}")
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise LibsvmParseError(lineno, f"malformed feature {tok!r}") from None
            if idx < 1:
                raise LibsvmParseError(lineno, f"feature index {idx} is not positive")
            if idx <= prev:
                raise LibsvmParseError(lineno, f"feature index {idx} does not increase after {prev}")
            if not np.isfinite(val):
                raise LibsvmParseError(lineno, f"feature value {val_s!r} is not finite")
            if n_features is not None and idx > n_features:
                raise LibsvmParseError(lineno, f"feature index {idx} exceeds n_features={n_features}")
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        indptr.append(len(indices))
        if binary:
            if label == 0.0:
                label = -1.0
            elif label not in (1.0, -1.0):
                raise LibsvmParseError(lineno, f"binary label must be +1/-1 or 0/1, got {tokens[0]!r}")
        labels.append(label)
    if not labels:
        raise LibsvmParseError(0, "no samples")
    d = n_features if n_features is not None else (max(indices) + 1 if indices else 0)
    X = sparse.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    return Dataset(X, np.array(labels))


def load_libsvm(path, n_features=None, binary=False):
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_libsvm(fh.read(), n_features=n_features, binary=binary)


def dump_libsvm(ds, fh=None):
    """Write ``ds`` in libsvm format with round-trip exact floats."""
    X = sparse.csr_matrix(ds.toarray() if not sparse.issparse(ds.X) else ds.X)
    X.sort_indices()
    out = fh if fh is not None else io.StringIO()
    for i in range(X.shape[0]):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{v!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi].tolist()))
        label = float(ds.y[i])
        lab = repr(int(label)) if label.is_integer() else repr(label)
        out.write(f"{lab} {feats}".rstrip() + "\n")
    if fh is None:
        return out.getvalue()


def normalize_features(ds):
    """Standardize every column to zero mean and unit (population) variance.

    Constant columns become all zero and are flagged in
    ``normalization_meta.constant``.  When the centered matrix would be more
    than half nonzero the result is dense; otherwise the transform is kept
    lazy through :class:`CenteredSparse`.
    """
    n, d = ds.n, ds.d
    if sparse.issparse(ds.X):
        X = sparse.csr_matrix(ds.X)
        mean = np.asarray(X.mean(axis=0)).ravel()
        # two-pass variance: stored entries plus the implicit zeros
        dev = X.data - mean[X.indices]
        stored = np.bincount(X.indices, weights=dev * dev, minlength=d)
        implicit = n - np.bincount(X.indices, minlength=d)
        var = (stored + implicit * mean**2) / n
    else:
        Xd = np.asarray(ds.toarray(), dtype=np.float64)
        mean = Xd.mean(axis=0)
        var = ((Xd - mean) ** 2).mean(axis=0)
    std = np.sqrt(var)
    constant = _constant_columns(ds)
    std = np.where(constant, 0.0, std)
    scale = np.where(constant, 0.0, 1.0 / np.where(constant, 1.0, std))
    meta = NormalizationMeta(mean, std, constant)

    if not sparse.issparse(ds.X):
        Z = (Xd - mean) * scale
        return Dataset(Z, ds.y.copy(), meta)

    # density after centering: entries of non-constant columns that differ from the mean
    X = sparse.csr_matrix(ds.X)
    nz_per_col = np.bincount(X.indices, minlength=d)
    zero_is_mean = (mean == 0.0)
    stored_eq_mean = np.bincount(X.indices[X.data == mean[X.indices]], minlength=d)
    nonzero_after = np.where(zero_is_mean, nz_per_col - stored_eq_mean,
                             n - stored_eq_mean)
    nonzero_after = np.where(constant, 0, nonzero_after)
    density = nonzero_after.sum() / float(n * d) if d else 0.0
    if density > DENSE_THRESHOLD:
        Z = (X.toarray() - mean) * scale
        return Dataset(Z, ds.y.copy(), meta)
    return Dataset(CenteredSparse(X, mean, scale), ds.y.copy(), meta)


def _constant_columns(ds):
    if sparse.issparse(ds.X):
        X = sparse.csc_matrix(ds.X)
        out = np.zeros(ds.d, dtype=bool)
        n = ds.n
        for j in range(ds.d):
            col = X.data[X.indptr[j]:X.indptr[j + 1]]
            if col.size == 0:
                out[j] = True
            elif col.size == n:
                out[j] = bool(np.all(col == col[0]))
            else:
                out[j] = bool(np.all(col == 0.0))
        return out
    Xd = ds.toarray()
    return np.all(Xd == Xd[:1], axis=0)


@dataclass(frozen=True)
class SyntheticSpec:
    """Random sparse-recovery problem.

    Features are i.i.d. standard normal; the ground truth has ``k`` entries
    equal to +-1 at random positions.  ``label_kind="regression"`` gives
    ``b = A x + noise``, ``"binary"`` gives ``sign(A x + noise)``.
    """

    n: int
    d: int
    k: int
    noise_std: float = 0.0
    label_kind: str = "regression"
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if not 0 <= self.k <= self.d:
            raise ValueError(f"support size k={self.k} must lie in [0, d={self.d}]")
        if self.label_kind not in ("regression", "binary"):
            raise ValueError(f"label_kind must be 'regression' or 'binary', got {self.label_kind!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


def generate_synthetic(spec):
    """Return ``(Dataset, x_true)`` for a :class:`SyntheticSpec`; deterministic in ``spec.seed``."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    A = rng.standard_normal((spec.n, spec.d))
    x_true = np.zeros(spec.d)
    support = np.sort(rng.choice(spec.d, size=spec.k, replace=False))
    x_true[support] = rng.choice([-1.0, 1.0], size=spec.k)
    noise = spec.noise_std * rng.standard_normal(spec.n)
    z = A @ x_true + noise
    if spec.label_kind == "binary":
        y = np.where(z >= 0.0, 1.0, -1.0)
    else:
        y = z
    return Dataset(A, y), x_true
