"""Quantum convolution over images, plus the on-disk cache of quanvolved tensors.

Every k x k window of every input channel is encoded as RY(pi * pixel)
rotations on k*k qubits, evolved through the fixed circuit, and read out as
one <Z> per qubit. Output channel ``c * k*k + q`` holds qubit ``q`` of input
channel ``c``.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from quanvae import circuit as circuit_mod
from quanvae import qsim, tensorio
from quanvae.circuit import CircuitSpec
from quanvae.errors import CacheError, ConfigError, DataFormatError, ShapeError

log = logging.getLogger(__name__)

_KIND_CODES = {"RX": 0, "RY": 1, "RZ": 2, "CNOT": 3}

_evaluations = 0


def evaluation_count() -> int:
    """Total circuit evaluations performed in this process."""
    return _evaluations


@dataclass(frozen=True)
class QuanvConfig:
    circuit: CircuitSpec
    patch_size: int = 4
    stride: int = 4
    per_channel: bool = True

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size**2 != self.circuit.num_qubits:
            raise ConfigError(
                f"patch {self.patch_size}x{self.patch_size} needs {self.patch_size ** 2} qubits, "
                f"circuit has {self.circuit.num_qubits}"
            )
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")

    def serialize(self) -> str:
        return (
            f"# patch={self.patch_size} stride={self.stride} per_channel={int(self.per_channel)}\n"
            + circuit_mod.serialize(self.circuit)
        )


def output_extent(size: int, patch: int, stride: int) -> int:
    return (size - patch) // stride + 1


def encode_patch(patch) -> np.ndarray:
    """Rotation angles for a patch: pi * pixel, row-major. Pixels must lie in [0, 1]."""
    values = np.asarray(patch, dtype=np.float64).reshape(-1)
    if not np.all((values >= 0.0) & (values <= 1.0)):
        raise DataFormatError("patch pixels must lie in [0, 1]")
    return math.pi * values


class _CompiledCircuit:
    def __init__(self, circuit: CircuitSpec):
        n = circuit.num_qubits
        gates = circuit.gates
        self.num_qubits = n
        self.kinds = np.array([_KIND_CODES[g.kind] for g in gates], dtype=np.int64)
        self.targets = np.array([qsim.wire_stride(n, g.target) for g in gates], dtype=np.int64)
        self.controls = np.array(
            [qsim.wire_stride(n, g.control) if g.kind == "CNOT" else 0 for g in gates], dtype=np.int64
        )
        half = np.array([g.angle / 2 if g.angle is not None else 0.0 for g in gates])
        self.cos = np.cos(half)
        self.sin = np.sin(half)


@njit(cache=True)
def _run_patches(angles, kinds, targets, controls, cos_g, sin_g, out):
    num_patches, nq = angles.shape
    v = np.empty(2 << nq)
    for p in range(num_patches):
        qsim._product_state(v, np.cos(angles[p] / 2), np.sin(angles[p] / 2))
        for g in range(kinds.shape[0]):
            k = kinds[g]
            if k == 0:
                qsim._apply_rx(v, targets[g], cos_g[g], sin_g[g])
            elif k == 1:
                qsim._apply_ry(v, targets[g], cos_g[g], sin_g[g])
            elif k == 2:
                qsim._apply_rz(v, targets[g], cos_g[g], sin_g[g])
            else:
                qsim._apply_cnot(v, controls[g], targets[g])
        qsim._expectations_z(v, nq, out[p])


def evaluate_patches(circuit: CircuitSpec, angles: np.ndarray) -> np.ndarray:
    """Run the circuit once per row of ``angles`` (shape P x num_qubits); returns P x num_qubits <Z>."""
    global _evaluations
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    if angles.ndim != 2 or angles.shape[1] != circuit.num_qubits:
        raise ShapeError(f"expected angles of shape (P, {circuit.num_qubits}), got {angles.shape}")
    cc = _CompiledCircuit(circuit)
    out = np.empty(angles.shape, dtype=np.float64)
    _run_patches(angles, cc.kinds, cc.targets, cc.controls, cc.cos, cc.sin, out)
    _evaluations += angles.shape[0]
    return out


def _patch_angles(images: np.ndarray, cfg: QuanvConfig) -> tuple[np.ndarray, tuple]:
    n, h, w, c = images.shape
    k, s = cfg.patch_size, cfg.stride
    if h < k or w < k:
        raise ShapeError(f"image {h}x{w} smaller than patch {k}x{k}")
    if c > 1 and not cfg.per_channel:
        raise ConfigError("multi-channel input requires per_channel mode")
    if images.size and not np.all((images >= 0.0) & (images <= 1.0)):
        raise DataFormatError("image pixels must lie in [0, 1]")
    ho, wo = output_extent(h, k, s), output_extent(w, k, s)
    windows = np.lib.stride_tricks.sliding_window_view(images, (k, k), axis=(1, 2))
    windows = windows[:, ::s, ::s][:, :ho, :wo]  # n, ho, wo, c, k, k
    angles = math.pi * windows.reshape(n * ho * wo * c, k * k).astype(np.float64)
    return angles, (n, ho, wo, c * k * k)


def quanvolve_batch(images: np.ndarray, cfg: QuanvConfig) -> np.ndarray:
    """Quanvolve an N x H x W x C batch; float64 output of shape N x H' x W' x (C * k * k)."""
    images = np.asarray(images)
    if images.ndim != 4:
        raise ShapeError(f"expected N x H x W x C images, got shape {images.shape}")
    angles, out_shape = _patch_angles(images, cfg)
    return evaluate_patches(cfg.circuit, angles).reshape(out_shape)


def quanvolve_image(image: np.ndarray, cfg: QuanvConfig) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3:
        raise ShapeError(f"expected H x W x C image, got shape {image.shape}")
    return quanvolve_batch(image[None], cfg)[0]


def cache_key(images: np.ndarray, cfg: QuanvConfig, dataset_id: str = "") -> str:
    data = np.ascontiguousarray(images, dtype="<f4")
    h = hashlib.sha256()
    h.update(dataset_id.encode())
    h.update(b"\0")
    h.update(cfg.serialize().encode())
    h.update(b"\0")
    h.update(repr(data.shape).encode())
    h.update(hashlib.sha256(data.tobytes()).digest())
    return h.hexdigest()[:32]


def cache_path(cache_dir, key: str) -> Path:
    return Path(cache_dir) / f"{key}.qtn"


def quanvolve_dataset(images: np.ndarray, cfg: QuanvConfig, cache_dir, dataset_id: str = "",
                      chunk: int = 256) -> np.ndarray:
    """Quanvolve a dataset, reusing a cached result keyed on data and config.

    Returns float32, the precision of the cache file, whether or not the
    cache was hit, so both paths give bit-identical tensors.
    """
    key = cache_key(images, cfg, dataset_id)
    path = cache_path(cache_dir, key)
    if path.exists():
        try:
            cached = tensorio.load(path)
        except CacheError as exc:
            log.warning("cache file %s unusable (%s); recomputing", path, exc)
        else:
            log.info("cache hit %s", key)
            return cached
    n = len(images)
    parts = []
    for start in range(0, n, chunk):
        parts.append(quanvolve_batch(images[start:start + chunk], cfg).astype(np.float32))
        log.info("quanvolved %d/%d images", min(start + chunk, n), n)
    if parts:
        result = np.concatenate(parts)
    else:
        _, (_, ho, wo, ch) = _patch_angles(images, cfg)
        result = np.zeros((0, ho, wo, ch), dtype=np.float32)
    tensorio.save(path, result)
    return tensorio.load(path)
