"""The uplink codec: top-S sparsification with value and position coding.

Compression of a dense update vector runs sparsify -> normalize ->
orthogonal transform -> scalar quantization for the retained values, and a
combinadic rank for their positions.  Reconstruction decodes the positions
exactly and estimates the values with the linear MMSE rescaling
``gain = gamma / psi`` of the quantizer outputs.

The payload layout is normative and documented in docs/wire-format.md.
Per sub-vector: mean (f32) | variance (f32) | packed value indices | rank.
Configuration (dimensions, levels, seeds) travels out of band, mirroring a
deployment where both link ends share the session setup.

With ``l_subvectors > 1`` the vector is zero-padded to a multiple of L,
shuffled by a seeded permutation, split into L equal sub-vectors, and each
sub-vector is coded independently; this caps the transform size at the
sub-vector sparsity and parallelizes trivially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .bitstream import BitReader, BitWriter
from .errors import DecodeError
from .positions import SupportSet, _comb_cached as positions_comb
from .positions import position_bit_cost, rank, unrank
from .quantizer import Q_MAX, get_quantizer
from .transform import SeedKey, cached_haar, derive_rng

TAG_TRANSFORM = 1
TAG_SHUFFLE = 2

# Below this sample variance the normalized vector is numerically meaningless;
# the encoder falls back to the exact constant-vector path.
NU_EPS = 1e-24

ValueCoding = Literal["lloyd_max", "float32"]


@dataclass(frozen=True)
class CodecParams:
    """Shared encoder/decoder configuration for one compressed update."""

    n: int
    s_level: int | tuple[int, ...]
    q_level: int | None = None
    l_subvectors: int = 1
    seed_key: SeedKey = (0,)
    value_coding: ValueCoding = "lloyd_max"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("ambient dimension must be positive")
        if self.l_subvectors < 1:
            raise ValueError("sub-vector count must be at least 1")
        if self.value_coding not in ("lloyd_max", "float32"):
            raise ValueError(f"unknown value coding {self.value_coding!r}")
        if self.value_coding == "lloyd_max":
            if self.q_level is None or not 2 <= self.q_level <= Q_MAX:
                raise ValueError(f"quantizer level must be in [2, {Q_MAX}]")
        levels = self.s_levels
        if len(levels) != self.l_subvectors:
            raise ValueError("need one sparsity level per sub-vector")
        sub = self.subvector_dim
        for s in levels:
            if not 0 <= s <= sub:
                raise ValueError(f"sub-vector sparsity {s} out of [0, {sub}]")
        if sum(levels) > self.n:
            raise ValueError("total sparsity exceeds the ambient dimension")
        if not all(isinstance(x, int) and x >= 0 for x in self.seed_key):
            raise ValueError("seed key must be nonnegative integers")

    @property
    def padded_dim(self) -> int:
        return self.l_subvectors * self.subvector_dim

    @property
    def subvector_dim(self) -> int:
        return -(-self.n // self.l_subvectors)

    @property
    def s_levels(self) -> tuple[int, ...]:
        if isinstance(self.s_level, int):
            return (self.s_level,) * self.l_subvectors
        return tuple(self.s_level)

    @property
    def total_sparsity(self) -> int:
        return sum(self.s_levels)


@dataclass(frozen=True)
class SparsifiedUpdate:
    """Support and signed values of the retained entries of a dense vector."""

    support: SupportSet
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CompressedUpdate:
    """Encoded payload; ``bit_length`` is the exact stream length before byte padding."""

    params: CodecParams
    payload: bytes
    bit_length: int


def value_bit_cost(s_count: int, q_level: int) -> int:
    """Width of the packed index field: ``ceil(s * log2 q)`` bits, exactly."""
    if s_count == 0:
        return 0
    return (q_level**s_count - 1).bit_length()


def subvector_bit_cost(
    n: int, s_count: int, q_level: int | None, value_coding: ValueCoding = "lloyd_max"
) -> int:
    """Exact payload bits contributed by one sub-vector."""
    if s_count == 0:
        return 0
    if value_coding == "float32":
        return 32 * s_count + position_bit_cost(n, s_count)
    return 64 + value_bit_cost(s_count, q_level) + position_bit_cost(n, s_count)


def payload_bit_length(params: CodecParams) -> int:
    """Exact total payload length implied by the parameters."""
    sub = params.subvector_dim
    return sum(
        subvector_bit_cost(sub, s, params.q_level, params.value_coding)
        for s in params.s_levels
    )


def sparsify(g: np.ndarray, s_level: int) -> SparsifiedUpdate:
    """Keep the ``s_level`` largest-magnitude entries; ties go to lower indices."""
    g = np.asarray(g, dtype=np.float64)
    if s_level > g.shape[0]:
        raise ValueError("sparsity level exceeds vector length")
    chosen = _select_top(np.abs(g), s_level)
    return SparsifiedUpdate(
        support=SupportSet(n=g.shape[0], positions=tuple(int(i) for i in chosen)),
        values=g[chosen],
    )


def _select_top(key: np.ndarray, s_count: int) -> np.ndarray:
    """Indices (ascending) of the s largest keys, stable toward lower indices."""
    if s_count == 0:
        return np.empty(0, dtype=np.intp)
    order = np.argsort(-key, kind="stable")[:s_count]
    return np.sort(order)


def _shuffle_perm(params: CodecParams) -> np.ndarray:
    rng = derive_rng(tuple(params.seed_key) + (TAG_SHUFFLE,))
    return rng.permutation(params.padded_dim)


def split_for_coding(g: np.ndarray, params: CodecParams) -> list[np.ndarray]:
    """The sub-vectors the encoder will see, after padding and shuffling.

    Exposed so parameter selection can score the same magnitude profiles
    the compressor acts on.
    """
    g = np.asarray(g, dtype=np.float64)
    if params.l_subvectors == 1:
        return [g]
    padded = np.zeros(params.padded_dim)
    padded[: params.n] = g
    shuffled = padded[_shuffle_perm(params)]
    sub = params.subvector_dim
    return [shuffled[i * sub : (i + 1) * sub] for i in range(params.l_subvectors)]


def compress(g: np.ndarray, params: CodecParams) -> CompressedUpdate:
    """Encode a dense update into a bit-exact payload."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (params.n,):
        raise ValueError(f"expected a vector of length {params.n}, got {g.shape}")
    if not np.isfinite(g).all():
        raise ValueError("update vector contains NaN or infinite entries")

    sub_dim = params.subvector_dim
    if params.l_subvectors == 1:
        subvectors = [g]
        pad_mask = [None]
    else:
        padded = np.zeros(params.padded_dim)
        padded[: params.n] = g
        perm = _shuffle_perm(params)
        shuffled = padded[perm]
        is_pad = perm >= params.n
        subvectors = [
            shuffled[i * sub_dim : (i + 1) * sub_dim] for i in range(params.l_subvectors)
        ]
        pad_mask = [
            is_pad[i * sub_dim : (i + 1) * sub_dim] for i in range(params.l_subvectors)
        ]

    writer = BitWriter()
    for idx, (sub, pads) in enumerate(zip(subvectors, pad_mask)):
        _compress_subvector(writer, sub, pads, idx, params)

    expected = payload_bit_length(params)
    if writer.bit_length != expected:
        raise AssertionError(
            f"payload accounting drift: wrote {writer.bit_length}, expected {expected}"
        )
    return CompressedUpdate(
        params=params, payload=writer.getvalue(), bit_length=writer.bit_length
    )


def _compress_subvector(
    writer: BitWriter,
    sub: np.ndarray,
    pads: np.ndarray | None,
    index: int,
    params: CodecParams,
) -> None:
    s_count = params.s_levels[index]
    if s_count == 0:
        return
    key = np.abs(sub)
    if pads is not None:
        # Zero padding must lose every magnitude tie against real entries.
        key = np.where(pads, -1.0, key)
    chosen = _select_top(key, s_count)
    values = sub[chosen]
    support = SupportSet(n=sub.shape[0], positions=tuple(int(i) for i in chosen))
    pos_bits = position_bit_cost(sub.shape[0], s_count)

    if params.value_coding == "float32":
        for v in values.astype(np.float32):
            writer.write_f32(float(v))
        writer.write_uint(rank(support), pos_bits)
        return

    q = params.q_level
    val_bits = value_bit_cost(s_count, q)
    mu = np.float32(values.mean())
    nu = np.float32(values.var())
    writer.write_f32(float(mu))
    if not nu > NU_EPS:
        # All retained values equal: the mean carries everything.
        writer.write_f32(0.0)
        writer.write_uint(0, val_bits)
    else:
        writer.write_f32(float(nu))
        v = (values - float(mu)) / math.sqrt(float(nu))
        u = cached_haar(s_count, tuple(params.seed_key) + (TAG_TRANSFORM, index))
        indices = get_quantizer(q).quantize(u.forward(v))
        packed = 0
        for d in indices:
            packed = packed * q + int(d)
        writer.write_uint(packed, val_bits)
    writer.write_uint(rank(support), pos_bits)


def reconstruct(update: CompressedUpdate, params: CodecParams | None = None) -> np.ndarray:
    """Decode a payload back into a dense N-vector estimate."""
    params = update.params if params is None else params
    reader = BitReader(update.payload, update.bit_length)
    sub_dim = params.subvector_dim

    parts = [
        _reconstruct_subvector(reader, sub_dim, idx, params)
        for idx in range(params.l_subvectors)
    ]
    if reader.remaining != 0:
        raise DecodeError("payload", f"{reader.remaining} unread trailing bits")

    if params.l_subvectors == 1:
        return parts[0]
    shuffled = np.concatenate(parts)
    padded = np.empty(params.padded_dim)
    padded[_shuffle_perm(params)] = shuffled
    return padded[: params.n]


def _reconstruct_subvector(
    reader: BitReader, sub_dim: int, index: int, params: CodecParams
) -> np.ndarray:
    out = np.zeros(sub_dim)
    s_count = params.s_levels[index]
    if s_count == 0:
        return out
    pos_bits = position_bit_cost(sub_dim, s_count)

    if params.value_coding == "float32":
        values = np.array([reader.read_f32("value") for _ in range(s_count)])
        support = _read_support(reader, sub_dim, s_count, pos_bits)
        out[list(support.positions)] = values
        return out

    q = params.q_level
    mu = reader.read_f32("mean")
    nu = reader.read_f32("variance")
    if not math.isfinite(mu):
        raise DecodeError("mean", "non-finite value")
    if not math.isfinite(nu) or nu < 0.0:
        raise DecodeError("variance", "negative or non-finite value")
    packed = reader.read_uint(value_bit_cost(s_count, q), "value-index")
    support = _read_support(reader, sub_dim, s_count, pos_bits)

    if nu == 0.0:
        if packed != 0:
            raise DecodeError("value-index", "expected all-zero field with zero variance")
        values = np.full(s_count, mu)
    else:
        if packed >= q**s_count:
            raise DecodeError("value-index", "packed indices out of range")
        digits = np.empty(s_count, dtype=np.intp)
        for i in range(s_count - 1, -1, -1):
            packed, d = divmod(packed, q)
            digits[i] = d
        quant = get_quantizer(q)
        x_hat = quant.gain * quant.dequantize(digits)
        u = cached_haar(s_count, tuple(params.seed_key) + (TAG_TRANSFORM, index))
        values = math.sqrt(nu) * u.inverse(x_hat) + mu

    out[list(support.positions)] = values
    return out


def _read_support(
    reader: BitReader, sub_dim: int, s_count: int, pos_bits: int
) -> SupportSet:
    r = reader.read_uint(pos_bits, "position-rank")
    try:
        return unrank(sub_dim, s_count, r)
    except ValueError as exc:
        raise DecodeError("position-rank", str(exc)) from exc


def nmse(g: np.ndarray, g_hat: np.ndarray) -> float:
    """Normalized squared error ||g - g_hat||^2 / ||g||^2."""
    g = np.asarray(g, dtype=np.float64)
    g_hat = np.asarray(g_hat, dtype=np.float64)
    if g.shape != g_hat.shape:
        raise ValueError("vectors must have equal length")
    denom = float(np.dot(g, g))
    if denom == 0.0:
        raise ValueError("reference vector is zero")
    diff = g - g_hat
    return float(np.dot(diff, diff)) / denom


def inspect_payload(update: CompressedUpdate) -> dict:
    """Structured dump of every field in a payload, for debugging and the CLI."""
    params = update.params
    reader = BitReader(update.payload, update.bit_length)
    sub_dim = params.subvector_dim
    sections = []
    for idx in range(params.l_subvectors):
        s_count = params.s_levels[idx]
        info: dict = {"subvector": idx, "s_level": s_count, "dim": sub_dim}
        if s_count == 0:
            info["bits"] = 0
            sections.append(info)
            continue
        start = reader.cursor
        pos_bits = position_bit_cost(sub_dim, s_count)
        if params.value_coding == "float32":
            values = [reader.read_f32("value") for _ in range(s_count)]
            info["values_head"] = values[: min(8, len(values))]
            info["value_bits"] = 32 * s_count
        else:
            info["mean"] = reader.read_f32("mean")
            info["variance"] = reader.read_f32("variance")
            val_bits = value_bit_cost(s_count, params.q_level)
            info["value_index_bits"] = val_bits
            reader.read_uint(val_bits, "value-index")
        rank_value = reader.read_uint(pos_bits, "position-rank")
        if rank_value >= positions_comb(sub_dim, s_count):
            raise DecodeError("position-rank", "rank out of range")
        info["position_bits"] = pos_bits
        info["position_rank_bit_length"] = rank_value.bit_length()
        info["bits"] = reader.cursor - start
        sections.append(info)
    return {
        "n": params.n,
        "l_subvectors": params.l_subvectors,
        "q_level": params.q_level,
        "value_coding": params.value_coding,
        "total_sparsity": params.total_sparsity,
        "bit_length": update.bit_length,
        "accounted_bits": payload_bit_length(params),
        "sections": sections,
    }
