"""Lloyd-Max scalar quantizers for the standard normal input.

The quantizers are trained once per level count with a closed-form
fixed-point iteration (conditional means of N(0,1) over the cells, then
midpoint thresholds) and cached.  Every consumer, device side or server
side, obtains codebooks through :func:`get_quantizer`, so both ends of the
link always hold identical tables.

Alongside the codebook each quantizer carries its linearization constants:
``gamma`` (the correlation E[Q(x) x] for x ~ N(0,1)) and ``psi`` (the output
second moment E[Q(x)^2]).  The ratio ``gamma / psi`` is the linear MMSE
gain used at reconstruction, and ``1 - gamma^2 / psi`` is the per-entry
quantization distortion.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

Q_MAX = 16

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _phi(x: np.ndarray) -> np.ndarray:
    """Standard normal pdf; exactly 0 at +-inf."""
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def _big_phi(x: np.ndarray) -> np.ndarray:
    """Standard normal cdf via the complementary error function."""
    return 0.5 * special.erfc(-x / _SQRT2)


@dataclass(frozen=True)
class Quantizer:
    """Trained symmetric scalar quantizer.

    ``levels`` are the Q codewords in increasing order; ``thresholds`` has
    Q+1 entries including -inf and +inf, and cell i is the half-open
    interval (thresholds[i], thresholds[i+1]].
    """

    q_level: int
    levels: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)
    gamma: float
    psi: float

    @property
    def gain(self) -> float:
        """Linear MMSE reconstruction gain gamma / psi."""
        return self.gamma / self.psi

    @property
    def distortion(self) -> float:
        """Per-entry MSE of the linear estimate, 1 - gamma^2 / psi."""
        return 1.0 - self.gamma * self.gamma / self.psi

    def quantize(self, x: np.ndarray) -> np.ndarray:
        """Map each entry to its cell index; ties at a threshold take the lower cell."""
        x = np.asarray(x, dtype=np.float64)
        if np.isnan(x).any():
            raise ValueError("cannot quantize NaN values")
        return np.searchsorted(self.thresholds[1:-1], x, side="left")

    def dequantize(self, indices: np.ndarray) -> np.ndarray:
        return self.levels[np.asarray(indices, dtype=np.intp)]


def bussgang_constants(levels: np.ndarray, thresholds: np.ndarray) -> tuple[float, float]:
    """Return (gamma, psi) for a codebook under the N(0,1) input model."""
    lo = thresholds[:-1]
    hi = thresholds[1:]
    gamma = float(np.sum(levels * (_phi(lo) - _phi(hi))))
    psi = float(np.sum(np.square(levels) * (_big_phi(hi) - _big_phi(lo))))
    return gamma, psi


def train_lloyd_max(
    q_level: int,
    *,
    q_max: int = Q_MAX,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> Quantizer:
    """Train the Q-level Lloyd-Max quantizer for the N(0,1) density.

    Codewords start at the standard normal quantiles (2i-1)/(2Q) and the
    iteration alternates closed-form conditional means with midpoint
    thresholds until the largest codeword change falls below ``tol``.
    Each step is symmetrized, which keeps the codebook exactly odd and
    pins the fixed point shared by encoder and decoder.
    """
    if not 2 <= q_level <= q_max:
        raise ValueError(f"quantizer level must be in [2, {q_max}], got {q_level}")

    probs = (2.0 * np.arange(1, q_level + 1) - 1.0) / (2.0 * q_level)
    levels = special.ndtri(probs)
    inf = np.array([np.inf])
    for _ in range(max_iter):
        interior = 0.5 * (levels[:-1] + levels[1:])
        thresholds = np.concatenate([-inf, interior, inf])
        mass = _big_phi(thresholds[1:]) - _big_phi(thresholds[:-1])
        new_levels = (_phi(thresholds[:-1]) - _phi(thresholds[1:])) / mass
        new_levels = 0.5 * (new_levels - new_levels[::-1])
        delta = float(np.max(np.abs(new_levels - levels)))
        levels = new_levels
        if delta < tol:
            break
    else:
        raise RuntimeError(f"Lloyd-Max iteration did not converge for Q={q_level}")

    interior = 0.5 * (levels[:-1] + levels[1:])
    thresholds = np.concatenate([-inf, interior, inf])
    gamma, psi = bussgang_constants(levels, thresholds)
    levels.setflags(write=False)
    thresholds.setflags(write=False)
    return Quantizer(
        q_level=q_level, levels=levels, thresholds=thresholds, gamma=gamma, psi=psi
    )


@lru_cache(maxsize=None)
def get_quantizer(q_level: int) -> Quantizer:
    """Cached trainer; all callers share one codebook per level count."""
    return train_lloyd_max(q_level)


def codebook_csv(q_levels=None) -> str:
    """CSV dump of the cached codebooks (debug aid): Q, i, level, upper threshold, gamma, psi."""
    if q_levels is None:
        q_levels = range(2, Q_MAX + 1)
    out = io.StringIO()
    out.write("q_level,index,level,upper_threshold,gamma,psi\n")
    for q in q_levels:
        quant = get_quantizer(q)
        for i in range(q):
            upper = quant.thresholds[i + 1]
            upper_str = repr(float(upper)) if math.isfinite(upper) else "inf"
            out.write(
                f"{q},{i},{float(quant.levels[i])!r},{upper_str},"
                f"{quant.gamma!r},{quant.psi!r}\n"
            )
    return out.getvalue()
