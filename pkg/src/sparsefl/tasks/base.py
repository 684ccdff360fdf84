"""Task interface consumed by the federated simulation loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class EvalResult:
    test_loss: float
    accuracy: float | None  # None for tasks without a classification metric


@runtime_checkable
class Task(Protocol):
    param_count: int
    device_count: int

    def init_params(self, rng: np.random.Generator) -> np.ndarray: ...

    def device_loss_grad(
        self, device_id: int, w: np.ndarray, rng: np.random.Generator, batch_size: int
    ) -> tuple[float, np.ndarray]:
        """One mini-batch loss and exact average gradient for a device shard."""
        ...

    def evaluate(self, w: np.ndarray) -> EvalResult: ...

    def full_gradient(self, w: np.ndarray) -> np.ndarray | None:
        """Exact global-loss gradient, or None when too expensive to offer."""
        ...
