"""Index sampling for the stochastic inner loops.

All randomness flows through :class:`SeededRng`, a thin wrapper around
NumPy's counter-based Philox generator.  Uniform variates are drawn in
fixed-size blocks, so the stream of indices depends only on the seed and
the sequence of calls, never on block boundaries.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SamplingDistribution",
    "SeededRng",
    "build_q",
    "inverse_cdf",
    "sample_nonuniform",
    "sample_uniform",
]

_BLOCK = 4096


class SeededRng:
    """Reproducible stream of uniforms on ``[0, 1)``.

    Parameters
    ----------
    seed : int
        Any integer in ``[0, 2**64)``.
    """

    def __init__(self, seed=0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(seed))
        self._buf = np.empty(0)
        self._pos = 0

    def uniform(self):
        if self._pos >= self._buf.size:
            self._buf = self._gen.random(_BLOCK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def uniforms(self, size):
        return np.array([self.uniform() for _ in range(size)])

    def spawn(self, key):
        """Independent child generator for worker ``key``."""
        ss = np.random.SeedSequence([self.seed, int(key)])
        return SeededRng(int(ss.generate_state(1, dtype=np.uint64)[0]))


@dataclass(frozen=True)
class SamplingDistribution:
    weights: np.ndarray
    cumulative: np.ndarray

    @property
    def n(self):
        return self.weights.size


def build_q(lipschitz):
    """Importance distribution ``q_i = L_i / (n * Lbar) = L_i / sum(L)``."""
    L = np.asarray(lipschitz, dtype=np.float64).ravel()
    if L.size == 0:
        raise ValueError("need at least one Lipschitz constant")
    if not np.all(L > 0) or not np.all(np.isfinite(L)):
        raise ValueError("Lipschitz constants must be positive and finite")
    n = L.size
    lbar = L.mean()
    q = L / (n * lbar)
    cum = np.cumsum(q)
    cum[-1] = 1.0
    return SamplingDistribution(q, cum)


def inverse_cdf(q, u):
    """Index ``i`` with ``cum[i-1] <= u < cum[i]``; works on scalars or arrays."""
    idx = np.searchsorted(q.cumulative, u, side="right")
    return np.minimum(idx, q.n - 1)


def sample_nonuniform(q, rng):
    return min(int(q.cumulative.searchsorted(rng.uniform(), "right")), q.n - 1)


def sample_uniform(n, rng):
    if n < 1:
        raise ValueError("n must be at least 1")
    return min(int(rng.uniform() * n), n - 1)
