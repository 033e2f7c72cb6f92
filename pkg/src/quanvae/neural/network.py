"""Declarative network specs, the static shape checker, and the sequential network."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from quanvae.errors import ConfigError, ShapeError
from quanvae.neural import layers as L

KINDS = ("Conv2D", "ReLU", "MaxPool", "UpSample", "Flatten", "Reshape", "Dense", "Tanh", "Sigmoid", "Dropout")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: Optional[int] = None
    kernel: Optional[tuple] = None
    stride: Optional[int] = None
    padding: Optional[str] = None
    units: Optional[int] = None
    rate: Optional[float] = None
    factor: Optional[int] = None
    target: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")

    def make(self) -> L.Layer:
        k = self.kind
        if k == "Conv2D":
            return L.Conv2D(self.filters, self.kernel, self.stride or 1, self.padding or "same")
        if k == "MaxPool":
            return L.MaxPool(self.kernel, self.stride, self.padding or "same")
        if k == "UpSample":
            return L.UpSample(self.factor)
        if k == "Reshape":
            return L.Reshape(self.target)
        if k == "Dense":
            return L.Dense(self.units)
        if k == "Dropout":
            return L.Dropout(self.rate)
        return getattr(L, k)()

    def to_text(self) -> str:
        parts = [self.kind]
        for f in fields(self)[1:]:
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = "x".join(str(v) for v in value)
            parts.append(f"{f.name}={value}")
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "LayerSpec":
        kind, *items = text.split()
        kwargs = {}
        for item in items:
            key, _, value = item.partition("=")
            if key in ("kernel", "target"):
                kwargs[key] = tuple(int(v) for v in value.split("x"))
            elif key == "padding":
                kwargs[key] = value
            elif key == "rate":
                kwargs[key] = float(value)
            elif key in ("filters", "stride", "units", "factor"):
                kwargs[key] = int(value)
            else:
                raise ConfigError(f"unknown layer field {key!r} in {text!r}")
        return cls(kind, **kwargs)


def conv(filters, k, padding="same"):
    return LayerSpec("Conv2D", filters=filters, kernel=(k, k), stride=1, padding=padding)


def maxpool(k, stride=None):
    return LayerSpec("MaxPool", kernel=(k, k), stride=stride or k, padding="same")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple
    bottleneck_width: Optional[int] = None
    output_shape: Optional[tuple] = None
    latent_index: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if self.output_shape is not None:
            object.__setattr__(self, "output_shape", tuple(self.output_shape))


def check_shapes(spec: NetworkSpec) -> list[tuple]:
    """Per-sample shape after each layer; raises ShapeError naming the first bad layer."""
    shape = tuple(spec.input_shape)
    shapes = []
    for i, ls in enumerate(spec.layers):
        try:
            shape = tuple(int(d) for d in ls.make().output_shape(shape))
        except ShapeError as exc:
            raise ShapeError(f"layer {i} ({ls.kind}): {exc}") from exc
        shapes.append(shape)
    final = shapes[-1] if shapes else shape
    if spec.output_shape is not None and final != spec.output_shape:
        raise ShapeError(f"network output {final} != expected {spec.output_shape}")
    if spec.latent_index is not None and spec.bottleneck_width is not None:
        if shapes[spec.latent_index] != (spec.bottleneck_width,):
            raise ShapeError(
                f"layer {spec.latent_index} output {shapes[spec.latent_index]} is not the "
                f"{spec.bottleneck_width}-wide bottleneck"
            )
    return shapes


class Network:
    def __init__(self, spec: NetworkSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.shapes = check_shapes(spec)
        self.dtype = np.dtype(dtype)
        self.layers = [ls.make() for ls in spec.layers]
        rng = np.random.default_rng(seed)
        shape = spec.input_shape
        for layer, out in zip(self.layers, self.shapes):
            layer.build(shape, rng, self.dtype)
            shape = out

    def forward(self, x, train=False, rng=None, stop=None):
        """Run layers ``0..stop`` (all by default). ``rng`` drives dropout in training mode."""
        x = np.asarray(x, dtype=self.dtype)
        if tuple(x.shape[1:]) != self.spec.input_shape:
            raise ShapeError(f"input sample shape {tuple(x.shape[1:])} != {self.spec.input_shape}")
        last = len(self.layers) - 1 if stop is None else stop
        for layer in self.layers[:last + 1]:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def latent(self, x):
        if self.spec.latent_index is None:
            raise ConfigError("network has no designated latent layer")
        return self.forward(x, stop=self.spec.latent_index)

    def parameters(self):
        """(layer index, name, array) for every trainable tensor, in a fixed order."""
        out = []
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                out.append((i, name, layer.params[name]))
        return out

    def gradients(self):
        return [self.layers[i].grads[name] for i, name, _ in self.parameters()]

    def astype(self, dtype) -> "Network":
        self.dtype = np.dtype(dtype)
        for layer in self.layers:
            for name in layer.params:
                layer.params[name] = layer.params[name].astype(dtype)
        return self


def bce_loss(pred, target, eps=1e-7):
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    p = np.clip(pred.astype(np.float64), eps, 1 - eps)
    t = target.astype(np.float64)
    return float(np.mean(-(t * np.log(p) + (1 - t) * np.log1p(-p))))


def bce_grad(pred, target, eps=1e-7):
    """d(bce_loss)/d(pred); zero where the clamp is active."""
    pred = np.asarray(pred)
    if pred.shape != np.shape(target):
        raise ShapeError(f"prediction shape {pred.shape} != target shape {np.shape(target)}")
    p = np.clip(pred, eps, 1 - eps)
    g = (p - target) / (p * (1 - p)) / pred.size
    inside = (pred > eps) & (pred < 1 - eps)
    return np.where(inside, g, 0).astype(pred.dtype, copy=False)
