"""Run orchestration: CSV emission, preset loading, and ablation sweeps.

CSV output is deterministic byte for byte: fixed column order, floats
rendered with ``repr`` (shortest round-trip form), per-device fields joined
with ``;`` in ascending device order, and no timestamps.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .config import ExperimentConfig, config_from_dict, config_from_toml
from .fl import ExperimentRun, RoundRecord, run_experiment

MNIST_DIR_ENV = "SPARSEFL_MNIST_DIR"

RECORD_COLUMNS = (
    "round",
    "participants",
    "bits",
    "s_total",
    "q_level",
    "nmse",
    "g_norm_sq",
    "residual_norm_sq",
    "zeta",
    "train_loss",
    "test_loss",
    "test_accuracy",
    "update_norm",
    "shadow_gap",
    "true_grad_sq",
)

SUMMARY_COLUMNS = (
    "name",
    "task",
    "rounds_run",
    "final_accuracy",
    "final_test_loss",
    "mean_bits_per_device_round",
    "mean_sparsity_ratio",
    "total_uplink_bits",
    "max_shadow_gap",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _join(values) -> str:
    return ";".join(_fmt(v) for v in values)


def record_row(record: RoundRecord) -> str:
    stats = record.device_stats
    cells = (
        str(record.round_index),
        _join(record.participants),
        _join(s.bits for s in stats),
        _join(s.s_total for s in stats),
        _join(s.q_level for s in stats),
        _join(s.nmse for s in stats),
        _join(s.g_norm_sq for s in stats),
        _join(s.residual_norm_sq for s in stats),
        _join(s.zeta for s in stats),
        _fmt(record.train_loss),
        _fmt(record.test_loss),
        _fmt(record.test_accuracy),
        _fmt(record.update_norm),
        _fmt(record.shadow_gap),
        _fmt(record.true_grad_sq),
    )
    return ",".join(cells)


def records_to_csv(records: list[RoundRecord]) -> str:
    out = io.StringIO()
    out.write(",".join(RECORD_COLUMNS) + "\n")
    for record in records:
        out.write(record_row(record) + "\n")
    return out.getvalue()


def summary_to_csv(run: ExperimentRun) -> str:
    s = run.summary
    row = (
        s.name,
        s.task,
        str(s.rounds_run),
        _fmt(s.final_accuracy),
        _fmt(s.final_test_loss),
        _fmt(s.mean_bits_per_device_round),
        _fmt(s.mean_sparsity_ratio),
        str(s.total_uplink_bits),
        _fmt(s.max_shadow_gap),
    )
    return ",".join(SUMMARY_COLUMNS) + "\n" + ",".join(row) + "\n"


@dataclass(frozen=True)
class ExperimentResult:
    run: ExperimentRun
    records_csv: str
    summary_csv: str


def run_from_config(cfg: ExperimentConfig, round_limit: int | None = None) -> ExperimentResult:
    run = run_experiment(cfg, round_limit=round_limit)
    return ExperimentResult(
        run=run, records_csv=records_to_csv(run.records), summary_csv=summary_to_csv(run)
    )


def write_result(result: ExperimentResult, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / f"{stem}_rounds.csv"
    summary_path = out_dir / f"{stem}_summary.csv"
    records_path.write_text(result.records_csv)
    summary_path.write_text(result.summary_csv)
    return records_path, summary_path


@dataclass(frozen=True)
class AblationResult:
    variants: list[tuple[str, ExperimentResult]]
    combined_csv: str


def replace_cfg(cfg: ExperimentConfig, suffix: str = "", **updates) -> ExperimentConfig:
    """Copy a config with overrides and a name suffix.

    A dict value updates the matching section (e.g. ``codec={"fixed_q": 4}``);
    anything else replaces the top-level field.
    """
    data = cfg.model_dump()
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    data["name"] = cfg.name + suffix
    return config_from_dict(data)


def ablation_variants(
    cfg: ExperimentConfig,
    q_levels: list[int],
    kappas: list[float],
    include_base: bool = True,
) -> list[tuple[str, ExperimentConfig]]:
    """Variant configs sharing the base seed: fixed-Q sweeps and kappa sweeps."""
    variants: list[tuple[str, ExperimentConfig]] = []
    if include_base and (q_levels or kappas):
        variants.append((cfg.name, cfg))
    for q in q_levels:
        variant = replace_cfg(
            cfg, suffix=f"_fixed_q{q}", codec={"fixed_q": q, "optimize": False}
        )
        variants.append((variant.name, variant))
    for kappa in kappas:
        variant = replace_cfg(cfg, suffix=f"_kappa{kappa:g}", kappa=kappa)
        variants.append((variant.name, variant))
    return variants


def ablate_from_config(
    cfg: ExperimentConfig,
    q_levels: list[int],
    kappas: list[float],
    round_limit: int | None = None,
) -> AblationResult:
    results: list[tuple[str, ExperimentResult]] = []
    for name, variant in ablation_variants(cfg, q_levels, kappas):
        results.append((name, run_from_config(variant, round_limit=round_limit)))
    header = "variant," + ",".join(RECORD_COLUMNS) + "\n"
    body = "".join(
        f"{name},{record_row(record)}\n"
        for name, result in results
        for record in result.run.records
    )
    return AblationResult(variants=results, combined_csv=header + body)


def preset_names() -> list[str]:
    root = resources.files("sparsefl") / "presets"
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str, mnist_dir: str | None = None) -> ExperimentConfig:
    """Load a packaged preset.

    Dataset paths inside presets are plain relative paths; they can be
    overridden explicitly or through the SPARSEFL_MNIST_DIR environment
    variable, and otherwise resolve against the working directory.
    """
    from .config import tomllib

    path = resources.files("sparsefl") / "presets" / f"{name}.toml"
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    cfg = config_from_dict(tomllib.loads(raw.decode()))
    override = mnist_dir or os.environ.get(MNIST_DIR_ENV)
    if override and cfg.data.mnist_dir is not None:
        cfg = cfg.model_copy(deep=True)
        cfg.data.mnist_dir = override
    return cfg
