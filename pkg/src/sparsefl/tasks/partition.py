"""Non-IID shard construction for the federated tasks."""

from __future__ import annotations

import numpy as np


def partition_one_class(
    labels: np.ndarray,
    num_devices: int,
    per_device: int,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Give every device ``per_device`` samples drawn from a single class.

    Classes are assigned round-robin (device k gets class k mod C) and the
    draws within a class are without replacement, so shards are disjoint.
    """
    classes = np.unique(labels)
    pools = {int(c): rng.permutation(np.flatnonzero(labels == c)) for c in classes}
    used = {int(c): 0 for c in classes}
    shards = []
    for k in range(num_devices):
        c = int(classes[k % len(classes)])
        start = used[c]
        if start + per_device > len(pools[c]):
            raise ValueError(
                f"class {c} has only {len(pools[c])} samples, cannot supply "
                f"{per_device} more for device {k}"
            )
        shards.append(np.sort(pools[c][start : start + per_device]))
        used[c] = start + per_device
    return shards


def partition_dirichlet(
    labels: np.ndarray,
    num_devices: int,
    alpha: float,
    rng: np.random.Generator,
    max_retries: int = 100,
) -> list[np.ndarray]:
    """Dirichlet-mixture shards: each device draws class proportions from
    Dir(alpha * 1) and every sample is assigned to exactly one device.

    Degenerate draws that leave a device empty are resampled.
    """
    if alpha <= 0:
        raise ValueError("concentration parameter must be positive")
    classes = np.unique(labels)
    for _ in range(max_retries):
        theta = rng.dirichlet(np.full(len(classes), alpha), size=num_devices)
        shards: list[list[np.ndarray]] = [[] for _ in range(num_devices)]
        for ci, c in enumerate(classes):
            pool = rng.permutation(np.flatnonzero(labels == c))
            weights = theta[:, ci]
            counts = _apportion(weights / weights.sum(), len(pool))
            start = 0
            for k, cnt in enumerate(counts):
                shards[k].append(pool[start : start + cnt])
                start += cnt
        result = [np.sort(np.concatenate(parts)) for parts in shards]
        if all(len(s) > 0 for s in result):
            return result
    raise RuntimeError("could not draw a partition with all devices nonempty")


def _apportion(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer split of ``total`` by ``weights`` (largest-remainder rounding)."""
    raw = weights * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base
