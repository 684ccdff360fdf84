"""Federated simulation loop with capacity-budgeted uplinks and error feedback.

Each round: a uniform sample of devices computes local updates, adds the
stored residual error, picks (S, Q) under its bit budget, compresses, and
locally reconstructs to refresh the residual; the server decodes every
payload, aggregates by mini-batch counts, and applies the global optimizer.
Devices that sit a round out scale their residual by the discount kappa.

Determinism contract: every random stream is derived from the master seed
and fixed integer tags, device streams are owned exclusively by their
device, and aggregation always runs in ascending device order, so results
are identical regardless of how many worker threads execute the device
phase.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import budget, codec
from .config import ExperimentConfig
from .tasks import Task, build_task
from .tasks.pathloss import PathLossModel, calibrate_scale_db
from .transform import derive_rng

TAG_INIT = 10
TAG_PARTICIPATION = 11
TAG_DEVICE_DATA = 12
TAG_PLACEMENT = 13


@dataclass
class DeviceState:
    device_id: int
    residual: np.ndarray = field(repr=False)
    capacity_bits: int
    rng: np.random.Generator = field(repr=False)


@dataclass(frozen=True)
class UplinkMessage:
    """What a device hands to the server for one round."""

    update: codec.CompressedUpdate | None  # None when the uplink is exact
    exact_vector: np.ndarray | None = None
    bypass_values: np.ndarray | None = None
    bits: int = 0


@dataclass(frozen=True)
class DeviceStats:
    bits: int
    s_total: int
    q_level: int | None
    nmse: float
    g_norm_sq: float
    residual_norm_sq: float
    zeta: float
    train_loss: float


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    participants: tuple[int, ...]
    device_stats: tuple[DeviceStats, ...]
    train_loss: float
    test_loss: float
    test_accuracy: float | None
    update_norm: float
    shadow_gap: float | None = None
    true_grad_sq: float | None = None


@dataclass(frozen=True)
class ExperimentSummary:
    name: str
    task: str
    rounds_run: int
    final_accuracy: float | None
    final_test_loss: float
    mean_bits_per_device_round: float
    mean_sparsity_ratio: float
    total_uplink_bits: int
    max_shadow_gap: float | None


@dataclass(frozen=True)
class ExperimentRun:
    config: ExperimentConfig
    records: list[RoundRecord]
    summary: ExperimentSummary
    final_params: np.ndarray = field(repr=False, default=None)


class GdServerOptimizer:
    def __init__(self, learning_rate: float, schedule: str, total_rounds: int):
        if schedule == "two_over_sqrt_t":
            self._eta = 2.0 / np.sqrt(total_rounds)
        else:
            self._eta = learning_rate

    @property
    def eta(self) -> float:
        return float(self._eta)

    def step(self, w: np.ndarray, g: np.ndarray, round_index: int) -> np.ndarray:
        return w - self._eta * g


class AdamServerOptimizer:
    def __init__(self, learning_rate: float, beta1: float, beta2: float, eps: float, dim: int):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)

    def step(self, w: np.ndarray, g: np.ndarray, round_index: int) -> np.ndarray:
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * np.square(g)
        m_hat = self.m / (1.0 - self.beta1**round_index)
        v_hat = self.v / (1.0 - self.beta2**round_index)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def build_server_optimizer(cfg: ExperimentConfig, dim: int):
    so = cfg.server_opt
    if so.kind == "gd":
        return GdServerOptimizer(so.learning_rate, so.eta_schedule, cfg.rounds)
    return AdamServerOptimizer(so.learning_rate, so.adam_beta1, so.adam_beta2, so.adam_eps, dim)


def local_update(
    task: Task,
    device_id: int,
    w: np.ndarray,
    rng: np.random.Generator,
    epochs: int,
    learning_rate: float,
    batch_size: int,
) -> tuple[np.ndarray, float]:
    """Scaled difference of the parameters across E local steps.

    For a single local epoch this is exactly the first mini-batch gradient;
    the learning rate cancels without a float division.
    """
    loss, grad = task.device_loss_grad(device_id, w, rng, batch_size)
    if epochs == 1:
        return grad, loss
    w_cur = w - learning_rate * grad
    for _ in range(epochs - 1):
        _, g_e = task.device_loss_grad(device_id, w_cur, rng, batch_size)
        w_cur = w_cur - learning_rate * g_e
    return (w - w_cur) / (learning_rate * epochs), loss


def plan_uplink(
    cfg: ExperimentConfig,
    g: np.ndarray,
    n: int,
    capacity_bits: int,
    seed_key: tuple[int, ...],
) -> codec.CodecParams:
    """Pick codec parameters for one device round under its bit budget."""
    cc = cfg.codec
    sub_count = cc.l_subvectors
    if cc.scheme == "float32":
        sub_dim = -(-n // sub_count)
        s = _densest_fit(sub_dim, None, capacity_bits // sub_count, "float32", sub_count == 1)
        return codec.CodecParams(
            n=n, s_level=s, q_level=None, l_subvectors=sub_count,
            seed_key=seed_key, value_coding="float32",
        )
    if cc.optimize:
        if sub_count == 1:
            choice = budget.choose_parameters(g, capacity_bits, cc.q_set)
        else:
            params0 = codec.CodecParams(
                n=n, s_level=0, q_level=2, l_subvectors=sub_count, seed_key=seed_key
            )
            subs = codec.split_for_coding(g, params0)
            choice = budget.choose_parameters_subvectors(
                subs, params0.subvector_dim, capacity_bits, cc.q_set
            )
        s_level = choice.s_per_subvector if sub_count > 1 else choice.s_star
        return codec.CodecParams(
            n=n, s_level=s_level, q_level=choice.q_star,
            l_subvectors=sub_count, seed_key=seed_key,
        )
    q = cc.fixed_q
    sub_dim = -(-n // sub_count)
    s = _densest_fit(sub_dim, q, capacity_bits // sub_count, "lloyd_max", sub_count == 1)
    return codec.CodecParams(
        n=n, s_level=s, q_level=q, l_subvectors=sub_count, seed_key=seed_key
    )


def _densest_fit(sub_dim: int, q, per_sub_bits: int, coding: str, allow_full: bool) -> int:
    """Budgeted sparsity for the non-optimized schemes.

    The optimizer's search space stops at half density where the payload
    cost is monotone; a full-density vector (zero position bits) can still
    be the right call when the budget allows it, and is what makes the
    lossless limit reachable.  Only offered without splitting, where full
    density cannot overrun the ambient dimension through padding.
    """
    if allow_full and codec.subvector_bit_cost(sub_dim, sub_dim, q, coding) <= per_sub_bits:
        return sub_dim
    return budget.s_max_for_q(sub_dim, q, per_sub_bits, coding)


@dataclass(frozen=True)
class DeviceRoundResult:
    device_id: int
    message: UplinkMessage
    g_hat_server: np.ndarray = field(repr=False)
    local_vec: np.ndarray = field(repr=False)
    stats: DeviceStats


def device_round(
    task: Task,
    device: DeviceState,
    w: np.ndarray,
    round_index: int,
    cfg: ExperimentConfig,
    keep_idx: np.ndarray | None,
    bypass_idx: np.ndarray | None,
) -> DeviceRoundResult:
    n = task.param_count
    local_vec, loss = local_update(
        task, device.device_id, w, device.rng,
        cfg.local_epochs, cfg.local_opt.learning_rate, cfg.batch_size,
    )
    g = local_vec + device.residual
    g_norm_sq = float(np.dot(g, g))

    if cfg.codec.scheme == "exact":
        g_hat = g.copy()
        message = UplinkMessage(update=None, exact_vector=g_hat, bits=32 * n)
        device.residual = np.zeros(n)
        stats = DeviceStats(
            bits=32 * n, s_total=n, q_level=None, nmse=0.0,
            g_norm_sq=g_norm_sq, residual_norm_sq=0.0, zeta=1.0, train_loss=loss,
        )
        return DeviceRoundResult(device.device_id, message, g_hat, local_vec, stats)

    if keep_idx is None:
        g_comp, bypass_values = g, None
        n_comp = n
    else:
        g_comp, bypass_values = g[keep_idx], g[bypass_idx]
        n_comp = g_comp.shape[0]

    seed_key = (cfg.seed, round_index, device.device_id)
    params = plan_uplink(cfg, g_comp, n_comp, device.capacity_bits, seed_key)
    update = codec.compress(g_comp, params)
    g_hat_comp = codec.reconstruct(update)

    # The server decode is a pure function of the payload; running it here
    # reuses the cached transform and cannot change the result.
    g_hat_server_comp = codec.reconstruct(update)

    g_hat = _merge(n, keep_idx, bypass_idx, g_hat_comp, bypass_values)
    g_hat_server = _merge(n, keep_idx, bypass_idx, g_hat_server_comp, bypass_values)
    device.residual = g - g_hat

    if params.value_coding == "float32":
        zeta = params.total_sparsity / n_comp
    else:
        zeta = budget.quality_factor(params.q_level) * params.total_sparsity / n_comp
    stats = DeviceStats(
        bits=update.bit_length,
        s_total=params.total_sparsity,
        q_level=params.q_level,
        nmse=codec.nmse(g, g_hat) if g_norm_sq > 0.0 else 0.0,
        g_norm_sq=g_norm_sq,
        residual_norm_sq=float(np.dot(device.residual, device.residual)),
        zeta=zeta,
        train_loss=loss,
    )
    message = UplinkMessage(
        update=update, bypass_values=bypass_values, bits=update.bit_length
    )
    return DeviceRoundResult(device.device_id, message, g_hat_server, local_vec, stats)


def _merge(n, keep_idx, bypass_idx, comp_part, bypass_values):
    if keep_idx is None:
        return comp_part
    out = np.empty(n)
    out[keep_idx] = comp_part
    out[bypass_idx] = bypass_values
    return out


def skip_round(device: DeviceState, kappa: float) -> None:
    device.residual = kappa * device.residual


def assign_capacities(cfg: ExperimentConfig, n: int) -> list[int]:
    if cfg.capacity.mode == "homogeneous":
        return [int(cfg.capacity.bits_per_entry * n)] * cfg.devices
    pl = cfg.capacity.pathloss
    model = PathLossModel(
        carrier_hz=pl.carrier_hz,
        exponent=pl.exponent,
        d0_m=pl.d0_m,
        sigma_db=pl.sigma_db,
        bandwidth_hz=pl.bandwidth_hz,
        uplink_time_s=pl.uplink_time_s,
    )
    model = replace(
        model,
        scale_db=calibrate_scale_db(pl.d_min_m, pl.d_max_m, pl.target_mean_snr_db, model),
    )
    rng = derive_rng((cfg.seed, TAG_PLACEMENT))
    distances = rng.uniform(pl.d_min_m, pl.d_max_m, cfg.devices)
    shadows = rng.normal(0.0, pl.sigma_db, cfg.devices)
    return [model.capacity_bits(float(d), float(z)) for d, z in zip(distances, shadows)]


def run_experiment(cfg: ExperimentConfig, round_limit: int | None = None) -> ExperimentRun:
    task = build_task(cfg)
    n = task.param_count
    rounds = cfg.rounds if round_limit is None else min(cfg.rounds, round_limit)

    bypass_idx = keep_idx = None
    if cfg.bypass_indices:
        bypass_idx = np.asarray(sorted(cfg.bypass_indices), dtype=np.intp)
        if bypass_idx[-1] >= n or bypass_idx[0] < 0:
            raise ValueError("bypass indices out of parameter range")
        keep_idx = np.setdiff1d(np.arange(n, dtype=np.intp), bypass_idx)

    w = task.init_params(derive_rng((cfg.seed, TAG_INIT)))
    part_rng = derive_rng((cfg.seed, TAG_PARTICIPATION))
    capacities = assign_capacities(cfg, n)
    devices = [
        DeviceState(
            device_id=k,
            residual=np.zeros(n),
            capacity_bits=capacities[k],
            rng=derive_rng((cfg.seed, TAG_DEVICE_DATA, k)),
        )
        for k in range(cfg.devices)
    ]
    server_opt = build_server_optimizer(cfg, n)
    shadow = w.copy() if cfg.diagnostics.shadow else None

    records: list[RoundRecord] = []
    for t in range(1, rounds + 1):
        chosen = np.sort(part_rng.choice(cfg.devices, size=cfg.participants, replace=False))
        participants = [int(k) for k in chosen]

        true_grad_sq = None
        if cfg.diagnostics.true_grad_norm:
            g_true = task.full_gradient(w)
            if g_true is not None:
                true_grad_sq = float(np.dot(g_true, g_true))

        run_one = lambda k: device_round(task, devices[k], w, t, cfg, keep_idx, bypass_idx)
        if cfg.parallel_devices > 1:
            with ThreadPoolExecutor(max_workers=cfg.parallel_devices) as pool:
                done = list(pool.map(run_one, participants))
        else:
            done = [run_one(k) for k in participants]
        results = {r.device_id: r for r in done}

        for k in range(cfg.devices):
            if k not in results:
                skip_round(devices[k], cfg.kappa)

        # Server phase: fixed ascending order keeps float sums reproducible.
        counts = float(cfg.batch_size * cfg.local_epochs)
        total = counts * len(participants)
        g_ps = np.zeros(n)
        for k in participants:
            g_ps += counts * results[k].g_hat_server
        g_ps /= total
        w = server_opt.step(w, g_ps, t)

        shadow_gap = None
        if shadow is not None:
            local_sum = np.zeros(n)
            for k in participants:
                local_sum += results[k].local_vec
            shadow = shadow - server_opt.eta * local_sum / len(participants)
            resid_sum = np.zeros(n)
            for dev in devices:
                resid_sum += dev.residual
            gap = shadow - w + server_opt.eta * resid_sum / cfg.participants
            shadow_gap = float(np.max(np.abs(gap)))

        evaluation = task.evaluate(w)
        stats = tuple(results[k].stats for k in participants)
        records.append(
            RoundRecord(
                round_index=t,
                participants=tuple(participants),
                device_stats=stats,
                train_loss=float(np.mean([s.train_loss for s in stats])),
                test_loss=evaluation.test_loss,
                test_accuracy=evaluation.accuracy,
                update_norm=float(np.linalg.norm(g_ps)),
                shadow_gap=shadow_gap,
                true_grad_sq=true_grad_sq,
            )
        )

    all_stats = [s for r in records for s in r.device_stats]
    n_comp = n if keep_idx is None else len(keep_idx)
    summary = ExperimentSummary(
        name=cfg.name,
        task=cfg.task,
        rounds_run=rounds,
        final_accuracy=records[-1].test_accuracy,
        final_test_loss=records[-1].test_loss,
        mean_bits_per_device_round=float(np.mean([s.bits for s in all_stats])),
        mean_sparsity_ratio=float(np.mean([s.s_total / n_comp for s in all_stats])),
        total_uplink_bits=int(sum(s.bits for s in all_stats)),
        max_shadow_gap=(
            max(r.shadow_gap for r in records) if cfg.diagnostics.shadow else None
        ),
    )
    return ExperimentRun(config=cfg, records=records, summary=summary, final_params=w)
