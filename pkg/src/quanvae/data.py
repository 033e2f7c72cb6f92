"""Loaders for MNIST (IDX) and CIFAR-10 (binary batches).

Images come back as float32 N x H x W x C arrays scaled by 1/255; labels as
uint8. Labels are carried for latent-space exports only, never for training.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quanvae.errors import ConfigError, DataFormatError

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE
CIFAR_RECORDS_PER_FILE = 10000

_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
_CIFAR_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}


@dataclass(frozen=True)
class DatasetHandle:
    name: str
    split: str
    images: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.images)


def to_unit(raw: np.ndarray) -> np.ndarray:
    return raw.astype(np.float32) / np.float32(255.0)


def _read_maybe_gzip(path: Path) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    try:
        with opener(path, "rb") as f:
            return f.read()
    except (OSError, EOFError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def parse_idx(blob: bytes, expected_magic: int, source="<bytes>") -> np.ndarray:
    """Parse an unsigned-byte IDX container into an array of its declared shape."""
    if len(blob) < 4:
        raise DataFormatError(f"{source}: truncated header")
    (magic,) = struct.unpack(">i", blob[:4])
    if magic != expected_magic:
        raise DataFormatError(f"{source}: bad magic {magic}, expected {expected_magic}")
    ndim = blob[3]
    head = 4 + 4 * ndim
    if len(blob) < head:
        raise DataFormatError(f"{source}: truncated header")
    dims = struct.unpack(f">{ndim}I", blob[4:head])
    count = int(np.prod(dims, dtype=np.int64))
    if len(blob) != head + count:
        raise DataFormatError(
            f"{source}: expected {head + count} bytes for dims {dims}, got {len(blob)}"
        )
    return np.frombuffer(blob, dtype=np.uint8, offset=head).reshape(dims)


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise ConfigError(f"no {stem}[.gz] in {directory}")


def load_mnist(directory, split: str = "train") -> DatasetHandle:
    if split not in _MNIST_FILES:
        raise ConfigError(f"unknown split {split!r}")
    directory = Path(directory)
    img_name, lbl_name = _MNIST_FILES[split]
    img_path = _find(directory, img_name)
    lbl_path = _find(directory, lbl_name)
    raw = parse_idx(_read_maybe_gzip(img_path), IDX_IMAGES_MAGIC, img_path)
    labels = parse_idx(_read_maybe_gzip(lbl_path), IDX_LABELS_MAGIC, lbl_path)
    if raw.ndim != 3:
        raise DataFormatError(f"{img_path}: expected 3 dims, got {raw.ndim}")
    if labels.ndim != 1 or len(labels) != len(raw):
        raise DataFormatError(f"{lbl_path}: {len(labels)} labels for {len(raw)} images")
    return DatasetHandle("mnist", split, to_unit(raw)[..., None], labels.copy())


def parse_cifar_batch(blob: bytes, expected_records=CIFAR_RECORDS_PER_FILE, source="<bytes>"):
    """Decode label byte + planar R, G, B records into channel-last images."""
    if len(blob) % CIFAR_RECORD:
        offset = len(blob) - len(blob) % CIFAR_RECORD
        raise DataFormatError(f"{source}: truncated record at byte offset {offset}")
    records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    if expected_records is not None and len(records) != expected_records:
        raise DataFormatError(f"{source}: {len(records)} records, expected {expected_records}")
    labels = records[:, 0].copy()
    planes = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    return planes.transpose(0, 2, 3, 1), labels


def load_cifar10(directory, split: str = "train", records_per_file=CIFAR_RECORDS_PER_FILE) -> DatasetHandle:
    """Load CIFAR-10 batches. ``records_per_file=None`` accepts any whole number of records."""
    if split not in _CIFAR_FILES:
        raise ConfigError(f"unknown split {split!r}")
    directory = Path(directory)
    images, labels = [], []
    for name in _CIFAR_FILES[split]:
        path = directory / name
        if not path.exists():
            raise ConfigError(f"missing CIFAR-10 file {path}")
        img, lbl = parse_cifar_batch(path.read_bytes(), records_per_file, path)
        images.append(img)
        labels.append(lbl)
    return DatasetHandle("cifar10", split, to_unit(np.concatenate(images)), np.concatenate(labels))


def load(name: str, directory, split: str = "train") -> DatasetHandle:
    if name == "mnist":
        return load_mnist(directory, split)
    if name == "cifar10":
        return load_cifar10(directory, split)
    raise ConfigError(f"unknown dataset {name!r}")


def subset(handle: DatasetHandle, n: int, seed: int = 0) -> DatasetHandle:
    """Seeded sample of ``n`` images without replacement."""
    if not 0 <= n <= len(handle):
        raise ConfigError(f"subset size {n} outside [0, {len(handle)}]")
    idx = np.random.default_rng(seed).permutation(len(handle))[:n]
    return DatasetHandle(handle.name, handle.split, handle.images[idx], handle.labels[idx])
