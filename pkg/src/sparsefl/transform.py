"""Seeded random orthogonal transforms.

The transform matrix is never transmitted: both ends of the link regenerate
it from a shared integer seed key, so generation must be deterministic down
to the bit.  The generator is pinned by the wire-format document
(docs/wire-format.md): PCG64 keyed through ``numpy.random.SeedSequence``,
uniforms mapped to normals by the inverse CDF (no rejection sampling), and
orthonormalization of the square Gaussian matrix by QR with the sign of
``diag(R)`` folded into the columns.  The sign correction makes the result
the unique factor with positive R diagonal, i.e. the same matrix classical
Gram-Schmidt would produce in exact arithmetic, and the column distribution
is Haar over the orthogonal group.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import special

SeedKey = tuple[int, ...]

_U53 = 1 << 53


def derive_rng(key: SeedKey) -> np.random.Generator:
    """Deterministic PCG64 generator from a tuple of nonnegative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def inverse_cdf_normals(rng: np.random.Generator, count: int) -> np.ndarray:
    """Standard normal samples via the inverse CDF of 53-bit uniforms.

    The low bit is forced to 1 so the uniform lies strictly inside (0, 1);
    every value is exactly representable and the normal is always finite.
    """
    raw = rng.integers(0, _U53, size=count, dtype=np.int64) | 1
    return special.ndtri(raw / _U53)


@dataclass(frozen=True)
class OrthoTransform:
    """Square orthogonal matrix regenerable from (dim, seed_key)."""

    dim: int
    seed_key: SeedKey
    matrix: np.ndarray = field(repr=False)

    def forward(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got {v.shape}")
        return self.matrix @ v

    def inverse(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got {x.shape}")
        return self.matrix.T @ x


def generate_haar(dim: int, seed_key: SeedKey) -> OrthoTransform:
    """Haar-distributed orthogonal matrix, bit-identical for a fixed key."""
    if dim < 1:
        raise ValueError("transform dimension must be at least 1")
    rng = derive_rng(seed_key)
    gauss = inverse_cdf_normals(rng, dim * dim).reshape(dim, dim)
    q, r = np.linalg.qr(gauss)
    signs = np.where(np.diagonal(r) >= 0.0, 1.0, -1.0)
    u = q * signs
    u.setflags(write=False)
    return OrthoTransform(dim=dim, seed_key=tuple(seed_key), matrix=u)


# Regeneration is the dominant cost for large dims.  The cache is bounded by
# total matrix entries rather than entry count, so it holds all sub-vector
# transforms of a round (many small matrices) without ever pinning more than
# a few hundred megabytes of large ones.  Thread-safe; entries are immutable.
_CACHE_ENTRY_BUDGET = 32_000_000  # float64 elements, about 256 MB


class _TransformCache:
    def __init__(self, budget: int) -> None:
        self._budget = budget
        self._used = 0
        self._items: "OrderedDict[tuple[int, SeedKey], OrthoTransform]" = OrderedDict()
        self._lock = threading.Lock()

    def get(self, dim: int, seed_key: SeedKey) -> OrthoTransform:
        key = (dim, tuple(seed_key))
        with self._lock:
            hit = self._items.get(key)
            if hit is not None:
                self._items.move_to_end(key)
                return hit
        made = generate_haar(dim, seed_key)
        with self._lock:
            if key not in self._items:
                self._items[key] = made
                self._used += dim * dim
                while self._used > self._budget and len(self._items) > 1:
                    _, evicted = self._items.popitem(last=False)
                    self._used -= evicted.dim * evicted.dim
            return self._items[key]

    def clear(self) -> None:
        with self._lock:
            self._items.clear()
            self._used = 0


_cache = _TransformCache(_CACHE_ENTRY_BUDGET)


def cached_haar(dim: int, seed_key: SeedKey) -> OrthoTransform:
    return _cache.get(dim, seed_key)
