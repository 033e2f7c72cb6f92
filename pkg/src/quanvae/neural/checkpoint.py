"""Checkpoint directories: ``manifest.txt`` plus one ``.qtn`` tensor per parameter."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from quanvae import tensorio
from quanvae.artifacts import read_manifest, write_manifest
from quanvae.errors import StateError
from quanvae.neural.network import LayerSpec, Network, NetworkSpec

MANIFEST = "manifest.txt"
FORMAT = "quanvae-checkpoint-1"


def _dims(shape) -> str:
    return "x".join(str(d) for d in shape)


def _parse_dims(text):
    return tuple(int(d) for d in text.split("x")) if text else ()


def save_checkpoint(directory, net: Network, metadata: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec = net.spec
    entries = {"format": FORMAT}
    entries.update(metadata)
    entries["input_shape"] = _dims(spec.input_shape)
    if spec.output_shape is not None:
        entries["output_shape"] = _dims(spec.output_shape)
    if spec.bottleneck_width is not None:
        entries["bottleneck"] = spec.bottleneck_width
    if spec.latent_index is not None:
        entries["latent_index"] = spec.latent_index
    entries["network"] = spec.name
    entries["num_layers"] = len(spec.layers)
    for i, ls in enumerate(spec.layers):
        entries[f"layer.{i}"] = ls.to_text()
    for i, name, value in net.parameters():
        fname = f"layer{i}_{name}.qtn"
        tensorio.save(directory / fname, value)
        entries[f"param.{i}.{name}"] = f"{fname} {_dims(value.shape)}"
    write_manifest(directory / MANIFEST, entries)
    return directory


def load_checkpoint(directory) -> tuple[Network, dict]:
    directory = Path(directory)
    path = directory / MANIFEST
    if not path.exists():
        raise StateError(f"no checkpoint manifest at {path}")
    meta = read_manifest(path)
    if meta.get("format") != FORMAT:
        raise StateError(f"{path}: unknown checkpoint format {meta.get('format')!r}")
    try:
        layers = tuple(LayerSpec.from_text(meta[f"layer.{i}"]) for i in range(int(meta["num_layers"])))
        spec = NetworkSpec(
            layers=layers,
            input_shape=_parse_dims(meta["input_shape"]),
            bottleneck_width=int(meta["bottleneck"]) if "bottleneck" in meta else None,
            output_shape=_parse_dims(meta["output_shape"]) if "output_shape" in meta else None,
            latent_index=int(meta["latent_index"]) if "latent_index" in meta else None,
            name=meta.get("network", ""),
        )
    except (KeyError, ValueError) as exc:
        raise StateError(f"{path}: incomplete network description ({exc})") from exc
    net = Network(spec, seed=0)
    for i, name, value in net.parameters():
        key = f"param.{i}.{name}"
        if key not in meta:
            raise StateError(f"{path}: missing parameter {key}")
        fname, dims = meta[key].split()
        loaded = tensorio.load(directory / fname)
        if loaded.shape != value.shape or _parse_dims(dims) != value.shape:
            raise StateError(f"{key}: checkpoint shape {loaded.shape} != network shape {value.shape}")
        net.layers[i].params[name] = loaded.astype(np.float32)
    return net, meta
