"""Experiment configuration: a versioned, human-editable TOML schema.

The same models validate TOML preset files, CLI overrides, and the JSON
bodies accepted by the service, so a configuration round-trips losslessly
between all three.  Paths in a TOML file are resolved relative to the file
itself at load time.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .quantizer import Q_MAX

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

CONFIG_VERSION = 1


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfig(_StrictModel):
    mnist_dir: Optional[str] = None
    partition: Literal["one_class", "dirichlet"] = "one_class"
    per_device: int = Field(default=1000, ge=1)
    alpha: float = Field(default=0.6, gt=0)
    data_seed: Optional[int] = Field(default=None, ge=0)


class ModelConfig(_StrictModel):
    hidden: int = Field(default=20, ge=1)
    # synthetic-task geometry
    dim: int = Field(default=256, ge=1)
    samples_per_device: int = Field(default=200, ge=1)
    noise_std: float = Field(default=0.05, ge=0)


class PathLossConfig(_StrictModel):
    d_min_m: float = Field(default=100.0, gt=0)
    d_max_m: float = Field(default=1000.0, gt=0)
    d0_m: float = Field(default=100.0, gt=0)
    carrier_hz: float = Field(default=2.4e9, gt=0)
    exponent: float = Field(default=4.0, gt=0)
    sigma_db: float = Field(default=math.sqrt(8.7), ge=0)
    target_mean_snr_db: float = 10.0
    bandwidth_hz: float = Field(default=1e6, gt=0)
    uplink_time_s: float = Field(default=1e-3, gt=0)

    @model_validator(mode="after")
    def _check_geometry(self) -> "PathLossConfig":
        if not self.d0_m <= self.d_min_m < self.d_max_m:
            raise ValueError("need d0_m <= d_min_m < d_max_m")
        return self


class CapacityConfig(_StrictModel):
    mode: Literal["homogeneous", "pathloss"] = "homogeneous"
    bits_per_entry: Optional[float] = Field(default=None, gt=0)
    pathloss: Optional[PathLossConfig] = None

    @model_validator(mode="after")
    def _check_mode(self) -> "CapacityConfig":
        if self.mode == "homogeneous" and self.bits_per_entry is None:
            raise ValueError("homogeneous capacity requires bits_per_entry")
        if self.mode == "pathloss" and self.pathloss is None:
            self.pathloss = PathLossConfig()
        return self


class CodecConfig(_StrictModel):
    scheme: Literal["quantized", "float32", "exact"] = "quantized"
    l_subvectors: int = Field(default=1, ge=1)
    q_max: int = Field(default=Q_MAX, ge=2, le=Q_MAX)
    fixed_q: Optional[int] = Field(default=None, ge=2, le=Q_MAX)
    optimize: bool = True

    @model_validator(mode="after")
    def _check_codec(self) -> "CodecConfig":
        if self.fixed_q is not None and self.optimize:
            raise ValueError("fixed_q requires optimize = false")
        if self.scheme == "quantized" and not self.optimize and self.fixed_q is None:
            raise ValueError("quantized scheme needs optimize = true or a fixed_q")
        if self.fixed_q is not None and self.fixed_q > self.q_max:
            raise ValueError("fixed_q exceeds q_max")
        return self

    @property
    def q_set(self) -> tuple[int, ...]:
        return tuple(range(2, self.q_max + 1))


class ServerOptConfig(_StrictModel):
    kind: Literal["adam", "gd"] = "adam"
    learning_rate: float = Field(default=0.01, gt=0)
    eta_schedule: Literal["constant", "two_over_sqrt_t"] = "constant"
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)


class LocalOptConfig(_StrictModel):
    learning_rate: float = Field(default=0.1, gt=0)


class DiagnosticsConfig(_StrictModel):
    shadow: bool = False
    true_grad_norm: bool = False


class ExperimentConfig(_StrictModel):
    config_version: int = CONFIG_VERSION
    name: str = "experiment"
    task: Literal["mnist", "synthetic"] = "mnist"
    seed: int = Field(default=0, ge=0)
    rounds: int = Field(default=100, ge=1)
    devices: int = Field(default=50, ge=1)
    participants: int = Field(default=20, ge=1)
    local_epochs: int = Field(default=1, ge=1)
    batch_size: int = Field(default=10, ge=1)
    kappa: float = Field(default=1.0, ge=0, le=1)
    parallel_devices: int = Field(default=1, ge=1)
    bypass_indices: list[int] = Field(default_factory=list)
    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    capacity: CapacityConfig = Field(default_factory=CapacityConfig)
    codec: CodecConfig = Field(default_factory=CodecConfig)
    server_opt: ServerOptConfig = Field(default_factory=ServerOptConfig)
    local_opt: LocalOptConfig = Field(default_factory=LocalOptConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        if self.config_version != CONFIG_VERSION:
            raise ValueError(
                f"config_version {self.config_version} unsupported, expected {CONFIG_VERSION}"
            )
        if self.participants > self.devices:
            raise ValueError("participants cannot exceed devices")
        if self.task == "mnist" and self.data.mnist_dir is None:
            raise ValueError("mnist task requires data.mnist_dir")
        if self.diagnostics.shadow and self.server_opt.kind != "gd":
            raise ValueError("shadow-iterate diagnostics require the gd server optimizer")
        if sorted(set(self.bypass_indices)) != sorted(self.bypass_indices):
            raise ValueError("bypass_indices must be unique")
        return self

    def to_dict(self) -> dict:
        return self.model_dump()


def config_from_dict(payload: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(
            [
                ".".join(str(p) for p in err["loc"]) + ": " + err["msg"]
                for err in exc.errors()
            ]
        ) from exc


def config_from_toml(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            payload = tomllib.load(f)
    except FileNotFoundError as exc:
        raise ConfigError([f"config file not found: {path}"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"invalid TOML in {path}: {exc}"]) from exc
    cfg = config_from_dict(payload)
    if cfg.data.mnist_dir is not None:
        resolved = (path.parent / cfg.data.mnist_dir).resolve()
        cfg = cfg.model_copy(deep=True)
        cfg.data.mnist_dir = str(resolved)
    return cfg
