"""IDX dataset ingestion (the classic MNIST file format).

Files may be raw or gzip-compressed; compression is sniffed from the
leading bytes, not the extension.  Pixel features are flattened and scaled
to [0, 1] as float32.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import IdxFormatError

MAGIC_IMAGES = 0x00000803
MAGIC_LABELS = 0x00000801

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (samples, dims) float32 in [0, 1]
    labels: np.ndarray  # (samples,) int64
    num_classes: int

    def __len__(self) -> int:
        return self.features.shape[0]


def _read_bytes(path: str | Path) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
        rest = f.read()
    raw = head + rest
    if head == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _parse_idx(path: str | Path, expected_magic: int) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: magic 0x{magic:08x} does not match expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}i", raw[4:header_len])
    count = int(np.prod(dims))
    body = raw[header_len:]
    if len(body) < count:
        raise IdxFormatError(
            f"{path}: truncated data section, expected {count} bytes, got {len(body)}"
        )
    if len(body) > count:
        raise IdxFormatError(f"{path}: {len(body) - count} trailing bytes")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx(images_path: str | Path, labels_path: str | Path) -> LabeledDataset:
    """Load an image/label IDX pair into a normalized dataset."""
    images = _parse_idx(images_path, MAGIC_IMAGES)
    labels = _parse_idx(labels_path, MAGIC_LABELS)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    features = images.reshape(images.shape[0], -1).astype(np.float32) / np.float32(255.0)
    labels64 = labels.astype(np.int64)
    return LabeledDataset(
        features=features, labels=labels64, num_classes=int(labels64.max()) + 1
    )


def _resolve(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / (stem + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"missing dataset file {stem}[.gz] under {directory}")


def load_mnist(directory: str | Path, split: str = "train") -> LabeledDataset:
    """Load the train or test split from a directory of standard IDX files."""
    directory = Path(directory)
    stems = TRAIN_FILES if split == "train" else TEST_FILES
    return load_idx(_resolve(directory, stems[0]), _resolve(directory, stems[1]))
