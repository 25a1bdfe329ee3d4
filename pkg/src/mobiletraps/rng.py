"""
Counter-based random streams.

Every random number is a pure function ``hash(seed, words..., counter)``
built from the SplitMix64 finaliser, so draws can be generated in any
order, in bulk (vectorised over keys), or in parallel, and always
reproduce bit for bit.
"""
from __future__ import annotations

import numpy as np
from scipy import stats

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finaliser on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x):
    x = np.asarray(x)
    if x.dtype == np.uint64:
        return x
    return x.astype(np.int64).view(np.uint64)


def derive(key, word):
    """Child key of ``key`` for ``word`` (both broadcastable uint64/int arrays)."""
    with np.errstate(over="ignore"):
        return mix64(_u64(key) ^ mix64(_u64(word) + _GOLDEN))


def seed_key(seed: int):
    """Root key for an integer seed (any Python int; reduced mod 2^64)."""
    return mix64(np.uint64(int(seed) & _MASK64) ^ _GOLDEN)


def uniform(key, counter):
    """Uniform draw in the open interval (0, 1) for each (key, counter)."""
    bits = derive(key, counter) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0 ** -53


def poisson(key, counter, mean):
    """Poisson(``mean``) draws by inversion of :func:`uniform`."""
    mean = np.asarray(mean, dtype=float)
    u = uniform(key, counter)
    if np.all(mean == 0):
        return np.zeros(np.shape(u), dtype=np.int64)
    if mean.ndim == 0:
        # one mean: invert a tabulated cdf, falling back to scipy in the far tail
        kmax = int(stats.poisson.isf(1e-15, mean)) + 1
        cdf = stats.poisson.cdf(np.arange(kmax + 1), mean)
        out = np.searchsorted(cdf, u, side="left")
        tail = out > kmax
        if np.any(tail):
            out[tail] = stats.poisson.ppf(u[tail], mean)
        return out.astype(np.int64)
    return stats.poisson.ppf(u, mean).astype(np.int64)


def zigzag(coords):
    """Map signed integers to unsigned ones (0,-1,1,-2,... -> 0,1,2,3,...)."""
    c = np.asarray(coords, dtype=np.int64)
    return np.where(c >= 0, 2 * c, -2 * c - 1).astype(np.uint64)


def site_key(key, points):
    """Per-site keys for lattice points of shape (..., d)."""
    points = np.asarray(points, dtype=np.int64)
    k = np.broadcast_to(_u64(key), points.shape[:-1]).copy()
    for i in range(points.shape[-1]):
        k = derive(k, zigzag(points[..., i]))
    return k


class CounterStream:
    """A named position in the key tree; ``child`` descends, draws are indexed."""

    def __init__(self, seed: int, *words: int):
        self.seed = int(seed)
        self.words = tuple(int(w) for w in words)
        k = seed_key(self.seed)
        for w in self.words:
            k = derive(k, w)
        self.key = k

    def child(self, *words: int) -> "CounterStream":
        return CounterStream(self.seed, *self.words, *words)

    def keys(self, indices):
        """Keys of the children ``0..n-1`` (or of the given indices), vectorised."""
        idx = np.arange(indices) if np.isscalar(indices) else np.asarray(indices)
        return derive(self.key, idx.astype(np.int64))

    def uniform(self, counter):
        return uniform(self.key, counter)

    def provenance(self) -> dict:
        return {"seed": self.seed, "path": list(self.words)}

    def __repr__(self):
        return f"CounterStream(seed={self.seed}, words={self.words})"
