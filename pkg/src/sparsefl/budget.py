"""Per-round selection of the sparsity and quantizer levels under a bit budget.

For each candidate quantizer level Q the budget admits a unique maximal
sparsity ``S_Q^max`` because the payload cost is strictly increasing in S
on the working range S <= N/2.  The default selection rule then scores each
Q by the retained energy scaled by the quantizer quality factor
``gamma^2 / psi`` and keeps the best; the exhaustive rule additionally
scans every S and includes the mean term of the distortion model.  Both
rules feed the same exact big-integer bit accounting used by the encoder,
so a chosen pair can never overflow the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codec import ValueCoding, subvector_bit_cost
from .positions import position_bit_cost_approx
from .quantizer import Q_MAX, get_quantizer

DEFAULT_Q_SET = tuple(range(2, Q_MAX + 1))


@dataclass(frozen=True)
class BudgetedChoice:
    """Outcome of one selection: the winning pair plus the per-Q scan."""

    s_star: int
    q_star: int | None
    s_max_per_q: dict[int, int]
    objective_per_q: dict[int, float]
    s_per_subvector: tuple[int, ...]


def approx_bit_cost(
    n: int, s_count: int, q_level: int | None, value_coding: ValueCoding = "lloyd_max"
) -> float:
    """Float estimate of the payload cost, for scanning only."""
    if s_count == 0:
        return 0.0
    pos = position_bit_cost_approx(n, s_count)
    if value_coding == "float32":
        return 32.0 * s_count + pos
    return s_count * math.log2(q_level) + 64.0 + pos


@lru_cache(maxsize=65536)
def s_max_for_q(
    n: int,
    q_level: int | None,
    capacity_bits: int,
    value_coding: ValueCoding = "lloyd_max",
) -> int:
    """Largest S <= N/2 whose exact payload cost fits in ``capacity_bits``.

    Binary search on the float cost estimate locates the boundary; the
    final answer is settled with the exact integer accounting, so the float
    path can never produce an infeasible level.  Returns 0 when even a
    single entry does not fit (for the quantized coding this covers every
    capacity at or below the 64-bit normalization header).
    """
    if value_coding == "lloyd_max" and capacity_bits <= 64:
        return 0
    s_cap = n // 2
    if s_cap == 0 or subvector_bit_cost(n, 1, q_level, value_coding) > capacity_bits:
        return 0

    lo, hi = 1, s_cap  # approx cost at lo already fits
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if approx_bit_cost(n, mid, q_level, value_coding) <= capacity_bits:
            lo = mid
        else:
            hi = mid - 1

    s = min(lo + 2, s_cap)
    while s > 1 and subvector_bit_cost(n, s, q_level, value_coding) > capacity_bits:
        s -= 1
    return s


def magnitude_profile(g: np.ndarray) -> np.ndarray:
    """Cumulative energy of the entries sorted by decreasing magnitude.

    ``profile[s]`` is the exact squared norm of the best s-term
    approximation; shared across every Q scanned for one update.
    """
    mags = np.sort(np.square(np.asarray(g, dtype=np.float64)))[::-1]
    return np.concatenate([[0.0], np.cumsum(mags)])


def quality_factor(q_level: int) -> float:
    """gamma^2 / psi of the cached quantizer, in (0, 1)."""
    quant = get_quantizer(q_level)
    return quant.gamma * quant.gamma / quant.psi


def choose_parameters(
    g: np.ndarray,
    capacity_bits: int,
    q_set: tuple[int, ...] = DEFAULT_Q_SET,
) -> BudgetedChoice:
    """Simplified selection rule for a single full-length vector.

    Scores each Q by ``(gamma^2/psi) * ||g_{S_Q^max}||^2`` using one shared
    sorted-energy prefix; ties break toward the smaller (cheaper) Q.  For an
    all-zero vector every objective is zero and the smallest Q wins, which
    is as good as any choice there.
    """
    return _choose([magnitude_profile(g)], np.asarray(g).shape[0], capacity_bits, q_set)


def choose_parameters_subvectors(
    subvectors: list[np.ndarray],
    subvector_dim: int,
    capacity_bits: int,
    q_set: tuple[int, ...] = DEFAULT_Q_SET,
) -> BudgetedChoice:
    """Selection in split mode: even budget split, one Q shared by all parts."""
    profiles = [magnitude_profile(sub) for sub in subvectors]
    per_sub = capacity_bits // len(subvectors)
    return _choose(profiles, subvector_dim, per_sub, q_set)


def _choose(
    profiles: list[np.ndarray],
    dim: int,
    capacity_bits: int,
    q_set: tuple[int, ...],
) -> BudgetedChoice:
    if not q_set:
        raise ValueError("empty quantizer candidate set")
    s_max_per_q: dict[int, int] = {}
    objective_per_q: dict[int, float] = {}
    best_q: int | None = None
    best_obj = -math.inf
    for q in sorted(q_set):
        s_max = s_max_for_q(dim, q, capacity_bits)
        s_max_per_q[q] = s_max
        obj = quality_factor(q) * sum(float(p[min(s_max, len(p) - 1)]) for p in profiles)
        objective_per_q[q] = obj
        if obj > best_obj:
            best_obj, best_q = obj, q
    s_star = s_max_per_q[best_q]
    return BudgetedChoice(
        s_star=s_star * len(profiles),
        q_star=best_q,
        s_max_per_q=s_max_per_q,
        objective_per_q=objective_per_q,
        s_per_subvector=(s_star,) * len(profiles),
    )


def exact_objective(g: np.ndarray, s_level: int, q_level: int) -> float:
    """Full selection objective including the mean term.

    Equals ``r ||g_S||^2 + S mu_S^2 (1 - r)`` with ``r = gamma^2/psi``;
    the achievable energy of the reconstruction for the given pair.
    """
    if s_level < 1:
        raise ValueError("sparsity level must be at least 1")
    g = np.asarray(g, dtype=np.float64)
    order = np.argsort(-np.abs(g), kind="stable")[:s_level]
    top = g[order]
    r = quality_factor(q_level)
    mu = float(top.mean())
    return r * float(np.dot(top, top)) + s_level * mu * mu * (1.0 - r)


def predicted_mse(g: np.ndarray, s_level: int, q_level: int) -> float:
    """Model-expected squared reconstruction error ||g||^2 - objective."""
    g = np.asarray(g, dtype=np.float64)
    return float(np.dot(g, g)) - exact_objective(g, s_level, q_level)


def exhaustive_choose(
    g: np.ndarray,
    capacity_bits: int,
    q_set: tuple[int, ...] = DEFAULT_Q_SET,
) -> BudgetedChoice:
    """Reference solver: scan every feasible (S, Q) with the exact objective.

    Kept as the oracle for the simplified rule; cost is O(|Q| N log N).
    """
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    signed_desc = g[np.argsort(-np.abs(g), kind="stable")]
    cum_energy = np.cumsum(np.square(signed_desc))
    cum_sum = np.cumsum(signed_desc)

    s_max_per_q: dict[int, int] = {}
    objective_per_q: dict[int, float] = {}
    best: tuple[float, int, int] | None = None  # (objective, q, s)
    for q in sorted(q_set):
        s_max = s_max_for_q(n, q, capacity_bits)
        s_max_per_q[q] = s_max
        if s_max == 0:
            objective_per_q[q] = 0.0
            continue
        r = quality_factor(q)
        counts = np.arange(1, s_max + 1, dtype=np.float64)
        obj = r * cum_energy[:s_max] + (np.square(cum_sum[:s_max]) / counts) * (1.0 - r)
        s_best = int(np.argmax(obj)) + 1
        objective_per_q[q] = float(obj[s_best - 1])
        if best is None or obj[s_best - 1] > best[0]:
            best = (float(obj[s_best - 1]), q, s_best)

    if best is None:
        q0 = min(q_set)
        return BudgetedChoice(0, q0, s_max_per_q, objective_per_q, (0,))
    _, q_star, s_star = best
    return BudgetedChoice(
        s_star=s_star,
        q_star=q_star,
        s_max_per_q=s_max_per_q,
        objective_per_q=objective_per_q,
        s_per_subvector=(s_star,),
    )
