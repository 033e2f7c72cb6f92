"""Binary tensor files (``.qtn``).

Layout, all little-endian::

    b"QTN1" | uint8 rank | rank x uint32 extents | float32 payload (row-major) | uint64 FNV-1a(payload)
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from numba import njit

from quanvae.errors import CacheError

MAGIC = b"QTN1"
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


@njit(cache=True)
def _fnv1a(data, offset, prime):
    h = offset
    for b in data:
        h ^= np.uint64(b)
        h *= prime
    return h


def fnv1a64(data: bytes) -> int:
    buf = np.frombuffer(data, dtype=np.uint8)
    return int(_fnv1a(buf, np.uint64(FNV_OFFSET), np.uint64(FNV_PRIME)))


def encode(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim > 255:
        raise ValueError("rank too large")
    payload = arr.tobytes()
    header = MAGIC + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + payload + struct.pack("<Q", fnv1a64(payload))


def decode(blob: bytes) -> np.ndarray:
    if len(blob) < 5 or blob[:4] != MAGIC:
        raise CacheError("bad magic, not a QTN1 tensor file")
    rank = blob[4]
    head = 5 + 4 * rank
    if len(blob) < head + 8:
        raise CacheError("truncated tensor header")
    shape = struct.unpack(f"<{rank}I", blob[5:head])
    count = int(np.prod(shape, dtype=np.int64))
    end = head + 4 * count
    if len(blob) != end + 8:
        raise CacheError(f"tensor file size {len(blob)} does not match shape {shape}")
    payload = blob[head:end]
    (stored,) = struct.unpack("<Q", blob[end:])
    if stored != fnv1a64(payload):
        raise CacheError("payload hash mismatch")
    return np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)


def save(path, array: np.ndarray) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(encode(array))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode(f.read())
