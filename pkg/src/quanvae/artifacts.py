"""Output files: key=value manifests, PGM/PPM images, CSV helpers."""

from __future__ import annotations

import csv
import hashlib
import re
from pathlib import Path

import numpy as np

from quanvae.errors import DataFormatError

_PNM_HEADER = re.compile(rb"(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s")


def sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def write_manifest(path, entries: dict) -> None:
    lines = []
    for key, value in entries.items():
        text = str(value)
        if "\n" in text or "=" in key:
            raise ValueError(f"manifest entry {key!r} is not a single key=value line")
        lines.append(f"{key}={text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    entries = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataFormatError(f"{path}:{lineno}: expected key=value")
        entries[key] = value
    return entries


def config_hash(config: dict) -> str:
    text = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def to_bytes(image: np.ndarray) -> np.ndarray:
    """[0, 1] floats to 8-bit with round-half-up: floor(p * 255 + 0.5)."""
    scaled = np.floor(np.asarray(image, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_pnm(path, image: np.ndarray) -> None:
    """Binary PGM (H x W or H x W x 1) or PPM (H x W x 3) from values in [0, 1]."""
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write image of shape {image.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + f"\n{w} {h}\n255\n".encode())
        f.write(to_bytes(img).tobytes())


def read_pnm(path) -> np.ndarray:
    """Read back a file written by ``write_pnm`` as uint8 H x W [x 3]."""
    blob = Path(path).read_bytes()
    # exactly one whitespace byte separates maxval from the pixels, which may themselves be whitespace
    m = _PNM_HEADER.match(blob)
    if m is None:
        raise DataFormatError(f"{path}: not a binary PGM/PPM file")
    w, h, maxval = int(m[2]), int(m[3]), int(m[4])
    if maxval != 255:
        raise DataFormatError(f"{path}: unsupported maxval {maxval}")
    channels = 3 if m[1] == b"P6" else 1
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=m.end())
    if pixels.size != w * h * channels:
        raise DataFormatError(f"{path}: pixel data size mismatch")
    return pixels.reshape((h, w, 3) if channels == 3 else (h, w))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
