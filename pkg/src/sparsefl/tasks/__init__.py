"""Learning tasks, data ingestion, and the capacity model."""

from __future__ import annotations

import numpy as np

from ..config import ExperimentConfig
from .base import EvalResult, Task
from .classification import MlpClassificationTask
from .mlp import MlpDims
from .mnist import LabeledDataset, load_idx, load_mnist
from .partition import partition_dirichlet, partition_one_class
from .pathloss import PathLossModel, calibrate_scale_db, capacity_from_pathloss
from .synthetic import SyntheticRegressionTask, make_synthetic_task

TAG_PARTITION = 14

__all__ = [
    "EvalResult",
    "Task",
    "LabeledDataset",
    "MlpDims",
    "MlpClassificationTask",
    "SyntheticRegressionTask",
    "PathLossModel",
    "load_idx",
    "load_mnist",
    "partition_one_class",
    "partition_dirichlet",
    "calibrate_scale_db",
    "capacity_from_pathloss",
    "make_synthetic_task",
    "build_task",
]


def build_task(cfg: ExperimentConfig) -> Task:
    """Construct the task named by a validated experiment configuration."""
    data_seed = cfg.data.data_seed if cfg.data.data_seed is not None else cfg.seed
    if cfg.task == "synthetic":
        return make_synthetic_task(
            num_devices=cfg.devices,
            samples_per_device=cfg.model.samples_per_device,
            dim=cfg.model.dim,
            noise_std=cfg.model.noise_std,
            seed=data_seed,
        )

    train = load_mnist(cfg.data.mnist_dir, "train")
    test = load_mnist(cfg.data.mnist_dir, "test")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((data_seed, TAG_PARTITION))))
    if cfg.data.partition == "one_class":
        shards = partition_one_class(train.labels, cfg.devices, cfg.data.per_device, rng)
    else:
        shards = partition_dirichlet(train.labels, cfg.devices, cfg.data.alpha, rng)
    dims = MlpDims(n_in=train.features.shape[1], n_hidden=cfg.model.hidden, n_out=train.num_classes)
    return MlpClassificationTask(dims=dims, train=train, shards=shards, test=test)
