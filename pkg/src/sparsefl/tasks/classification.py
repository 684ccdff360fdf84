"""Image-classification task: the flat-parameter MLP over dataset shards."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .base import EvalResult
from .mnist import LabeledDataset


@dataclass
class MlpClassificationTask:
    dims: mlp.MlpDims
    train: LabeledDataset = field(repr=False)
    shards: list[np.ndarray] = field(repr=False)
    test: LabeledDataset = field(repr=False)
    _test_features64: np.ndarray | None = field(default=None, repr=False)

    @property
    def param_count(self) -> int:
        return self.dims.param_count

    @property
    def device_count(self) -> int:
        return len(self.shards)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return mlp.init_params(self.dims, rng)

    def device_loss_grad(
        self, device_id: int, w: np.ndarray, rng: np.random.Generator, batch_size: int
    ) -> tuple[float, np.ndarray]:
        shard = self.shards[device_id]
        if len(shard) == 0:
            raise ValueError(f"device {device_id} has an empty shard")
        pick = rng.choice(len(shard), size=min(batch_size, len(shard)), replace=False)
        idx = shard[pick]
        x = self.train.features[idx].astype(np.float64)
        y = self.train.labels[idx]
        return mlp.loss_and_grad(w, self.dims, x, y)

    def full_gradient(self, w: np.ndarray) -> None:
        return None  # full-dataset gradient is not worth its cost here

    def evaluate(self, w: np.ndarray) -> EvalResult:
        if self._test_features64 is None:
            self._test_features64 = self.test.features.astype(np.float64)
        loss, acc = mlp.evaluate(w, self.dims, self._test_features64, self.test.labels)
        return EvalResult(test_loss=loss, accuracy=acc)
