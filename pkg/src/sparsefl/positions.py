"""Lossless support-set coding via the combinatorial number system.

An S-subset ``{p_1 < ... < p_S}`` of ``{0..n-1}`` maps bijectively to its
0-based lexicographic rank ``r = sum_i C(p_i, i)`` in ``[0, C(n, S))``.
Ranks are arbitrary-precision integers; ``C(15910, 500)`` has thousands of
bits, so rank and unrank are computed with incremental multiplicative
updates of a single running binomial, O(n + S) big-integer operations,
instead of S independent ``math.comb`` calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing positions of the retained entries within [0, n)."""

    n: int
    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("ambient dimension must be nonnegative")
        prev = -1
        for p in self.positions:
            if p <= prev:
                raise ValueError("positions must be strictly increasing")
            prev = p
        if self.positions and not (0 <= self.positions[0] and prev < self.n):
            raise ValueError(f"positions must lie in [0, {self.n})")

    def __len__(self) -> int:
        return len(self.positions)


@lru_cache(maxsize=4096)
def _comb_cached(n: int, k: int) -> int:
    return math.comb(n, k)


def _sparse_subset(n: int, s_count: int) -> bool:
    # Per-term math.comb work grows with s^2 while the incremental walk is
    # O(n); jump straight to terms only when the subset is sparse enough.
    return s_count * s_count <= 4 * n


def rank(s: SupportSet) -> int:
    """Lexicographic index of the subset among all ``len(s)``-subsets of n."""
    positions = s.positions
    if _sparse_subset(s.n, len(positions)):
        comb = math.comb
        return sum(comb(p, i) for i, p in enumerate(positions, start=1) if p >= i)
    r = 0
    b = 0  # running binomial C(p_cur, k_cur); 0 means "not started"
    p_cur = k_cur = 0
    for i, p in enumerate(positions, start=1):
        if p < i:
            continue  # C(i-1, i) = 0 contributes nothing
        if b == 0:
            b, p_cur, k_cur = 1, i, i
        while k_cur < i:
            b = b * (p_cur - k_cur) // (k_cur + 1)
            k_cur += 1
            if b == 0:  # p_cur fell below k_cur; restart at C(k, k) = 1
                b, p_cur = 1, k_cur
        while p_cur < p:
            p_cur += 1
            b = b * p_cur // (p_cur - k_cur)
        r += b
    return r


def _log2_int(r: int) -> float:
    """log2 of a positive integer of arbitrary size."""
    shift = max(0, r.bit_length() - 53)
    return math.log2(r >> shift) + shift


def _log2_comb(p: int, k: int) -> float:
    if k < 0 or k > p:
        return -math.inf
    if k in (0, p):
        return 0.0
    return LOG2E * (math.lgamma(p + 1) - math.lgamma(k + 1) - math.lgamma(p - k + 1))


def _unrank_jump(n: int, s_count: int, r: int) -> list[int]:
    """Greedy decode that jumps straight to each selection boundary.

    A float binary search on log-gamma locates the largest p with
    C(p, k) <= r to within a step or two; the exact big-integer comparison
    settles it.  O(s^2) C-level big-int operations, no O(n) walk.
    """
    comb = math.comb
    out: list[int] = []
    p_hi = n - 1
    for k in range(s_count, 0, -1):
        if r == 0:
            # Remaining selections are the smallest possible combination.
            out.extend(range(k - 1, -1, -1))
            break
        target = _log2_int(r)
        lo, hi = k - 1, p_hi  # C(k-1, k) = 0 <= r always holds
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _log2_comb(mid, k) <= target:
                lo = mid
            else:
                hi = mid - 1
        p = lo
        b = comb(p, k)
        while b > r:  # float landing can overshoot by a step
            b = b * (p - k) // p
            p -= 1
        while p < p_hi and b * (p + 1) // (p + 1 - k) <= r:
            b = b * (p + 1) // (p + 1 - k)
            p += 1
        out.append(p)
        r -= b
        p_hi = p - 1
    out.reverse()
    return out


def unrank(n: int, s_count: int, r: int) -> SupportSet:
    """Inverse of :func:`rank`; greedy decode from the largest position down."""
    if s_count < 0 or s_count > n:
        raise ValueError("subset size out of range")
    if not 0 <= r < _comb_cached(n, s_count):
        raise ValueError(f"rank {r} out of range for C({n}, {s_count})")
    if s_count == 0:
        return SupportSet(n=n, positions=())
    if _sparse_subset(n, s_count):
        return SupportSet(n=n, positions=tuple(_unrank_jump(n, s_count, r)))
    out: list[int] = []
    k = s_count
    p = n - 1
    b = math.comb(p, k)
    while k > 0:
        if b <= r:  # largest p with C(p, k) <= remaining rank
            r -= b
            out.append(p)
            if k > 1:
                b = b * k // p
            k -= 1
        else:
            b = b * (p - k) // p
        p -= 1
    out.reverse()
    return SupportSet(n=n, positions=tuple(out))


@lru_cache(maxsize=4096)
def position_bit_cost(n: int, s_count: int) -> int:
    """Exact width of the position field: ``ceil(log2 C(n, s))`` bits."""
    if not 0 <= s_count <= n:
        raise ValueError("subset size out of range")
    c = math.comb(n, s_count)
    return (c - 1).bit_length()


def position_bit_cost_approx(n: int, s_count: int) -> float:
    """Float estimate of ``log2 C(n, s)`` via log-gamma, for optimizer scans.

    Agrees with :func:`position_bit_cost` to well within one bit over the
    whole usable range; the boundary decisions still use the exact value.
    """
    if not 0 <= s_count <= n:
        raise ValueError("subset size out of range")
    if s_count in (0, n):
        return 0.0
    return LOG2E * (
        math.lgamma(n + 1) - math.lgamma(s_count + 1) - math.lgamma(n - s_count + 1)
    )
