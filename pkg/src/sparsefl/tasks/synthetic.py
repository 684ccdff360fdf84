"""Synthetic least-squares task with exact full-batch gradients.

Strongly convex, cheap to differentiate exactly, and therefore the right
vehicle for convergence-behavior checks where the classification tasks are
too noisy or too slow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import EvalResult


@dataclass
class SyntheticRegressionTask:
    device_features: list[np.ndarray]
    device_targets: list[np.ndarray]
    test_features: np.ndarray = field(repr=False)
    test_targets: np.ndarray = field(repr=False)
    init_scale: float = 0.1

    @property
    def param_count(self) -> int:
        return self.device_features[0].shape[1]

    @property
    def device_count(self) -> int:
        return len(self.device_features)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return self.init_scale * rng.standard_normal(self.param_count)

    def device_loss_grad(
        self, device_id: int, w: np.ndarray, rng: np.random.Generator, batch_size: int
    ) -> tuple[float, np.ndarray]:
        x = self.device_features[device_id]
        y = self.device_targets[device_id]
        idx = rng.choice(x.shape[0], size=min(batch_size, x.shape[0]), replace=False)
        xb, yb = x[idx], y[idx]
        resid = xb @ w - yb
        loss = 0.5 * float(np.mean(resid**2))
        grad = xb.T @ resid / xb.shape[0]
        return loss, grad

    def full_gradient(self, w: np.ndarray) -> np.ndarray:
        # Global loss weights devices by shard size; shards here are equal.
        num = np.zeros_like(w)
        count = 0
        for x, y in zip(self.device_features, self.device_targets):
            num += x.T @ (x @ w - y)
            count += x.shape[0]
        return num / count

    def evaluate(self, w: np.ndarray) -> EvalResult:
        resid = self.test_features @ w - self.test_targets
        return EvalResult(test_loss=0.5 * float(np.mean(resid**2)), accuracy=None)


def make_synthetic_task(
    num_devices: int,
    samples_per_device: int,
    dim: int,
    noise_std: float,
    seed: int,
) -> SyntheticRegressionTask:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 900))))
    w_true = rng.standard_normal(dim)
    feats, targets = [], []
    for _ in range(num_devices):
        x = rng.standard_normal((samples_per_device, dim))
        y = x @ w_true + noise_std * rng.standard_normal(samples_per_device)
        feats.append(x)
        targets.append(y)
    x_test = rng.standard_normal((4 * samples_per_device, dim))
    y_test = x_test @ w_true + noise_std * rng.standard_normal(4 * samples_per_device)
    return SyntheticRegressionTask(
        device_features=feats,
        device_targets=targets,
        test_features=x_test,
        test_targets=y_test,
    )
