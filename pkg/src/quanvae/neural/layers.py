"""Layers with hand-written forward and backward passes, channel-last (N, H, W, C).

Shapes passed to ``output_shape``/``build`` exclude the batch axis.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from quanvae.errors import ConfigError, ShapeError, StateError


def same_padding(size: int, kernel: int, stride: int) -> tuple[int, int, int]:
    """Output extent and (before, after) padding, TensorFlow's "same" rule."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _window_geometry(h, w, kernel, stride, padding):
    kh, kw = kernel
    if padding == "same":
        ho, pt, pb = same_padding(h, kh, stride)
        wo, pl, pr = same_padding(w, kw, stride)
    elif padding == "none":
        if h < kh or w < kw:
            raise ShapeError(f"input {h}x{w} smaller than kernel {kh}x{kw} without padding")
        ho, wo = (h - kh) // stride + 1, (w - kw) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ConfigError(f"unknown padding mode {padding!r}")
    return ho, wo, ((pt, pb), (pl, pr))


def _require_rank(layer, shape, rank):
    if len(shape) != rank:
        raise ShapeError(f"{type(layer).__name__} expects rank-{rank} samples, got shape {tuple(shape)}")


class Layer:
    params: dict
    grads: dict

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def output_shape(self, shape):
        return tuple(shape)

    def build(self, shape, rng, dtype):
        pass

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called without a forward cache")
        cache, self._cache = self._cache, None
        return cache


def _uniform_fan_in(rng, shape, fan_in, dtype):
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    def __init__(self, filters, kernel, stride=1, padding="same"):
        super().__init__()
        self.filters = filters
        self.kernel = tuple(kernel)
        self.stride = stride
        self.padding = padding

    def output_shape(self, shape):
        _require_rank(self, shape, 3)
        ho, wo, _ = _window_geometry(shape[0], shape[1], self.kernel, self.stride, self.padding)
        return (ho, wo, self.filters)

    def build(self, shape, rng, dtype):
        kh, kw = self.kernel
        fan_in = kh * kw * shape[2]
        self.params["W"] = _uniform_fan_in(rng, (kh, kw, shape[2], self.filters), fan_in, dtype)
        self.params["b"] = np.zeros(self.filters, dtype=dtype)

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        kh, kw = self.kernel
        s = self.stride
        ho, wo, pads = _window_geometry(h, w, self.kernel, s, self.padding)
        xp = np.pad(x, ((0, 0), *pads, (0, 0)))
        win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::s, ::s][:, :ho, :wo]
        cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)
        W = self.params["W"].reshape(kh * kw * c, self.filters)
        y = cols @ W + self.params["b"]
        self._cache = (cols, x.shape, xp.shape, pads, ho, wo)
        return y.reshape(n, ho, wo, self.filters)

    def backward(self, dy):
        cols, xshape, xpshape, pads, ho, wo = self._take_cache()
        n, h, w, c = xshape
        kh, kw = self.kernel
        s = self.stride
        dy2 = dy.reshape(-1, self.filters)
        W = self.params["W"].reshape(kh * kw * c, self.filters)
        self.grads["W"] = (cols.T @ dy2).reshape(self.params["W"].shape)
        self.grads["b"] = dy2.sum(axis=0)
        dcols = (dy2 @ W.T).reshape(n, ho, wo, kh, kw, c)
        dxp = np.zeros(xpshape, dtype=dy.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i:i + s * ho:s, j:j + s * wo:s, :] += dcols[:, :, :, i, j, :]
        (pt, _), (pl, _) = pads
        return dxp[:, pt:pt + h, pl:pl + w, :]


class MaxPool(Layer):
    def __init__(self, pool, stride=None, padding="same"):
        super().__init__()
        self.pool = tuple(pool)
        self.stride = stride if stride is not None else self.pool[0]
        self.padding = padding

    def output_shape(self, shape):
        _require_rank(self, shape, 3)
        ho, wo, _ = _window_geometry(shape[0], shape[1], self.pool, self.stride, self.padding)
        return (ho, wo, shape[2])

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        ph, pw = self.pool
        s = self.stride
        ho, wo, pads = _window_geometry(h, w, self.pool, s, self.padding)
        xp = np.pad(x, ((0, 0), *pads, (0, 0)), constant_values=-np.inf)
        win = sliding_window_view(xp, (ph, pw), axis=(1, 2))[:, ::s, ::s][:, :ho, :wo]
        flat = win.reshape(n, ho, wo, c, ph * pw)
        arg = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        self._cache = (arg, x.shape, xp.shape, pads, ho, wo)
        return y

    def backward(self, dy):
        arg, xshape, xpshape, pads, ho, wo = self._take_cache()
        _, h, w, _ = xshape
        ph, pw = self.pool
        s = self.stride
        dxp = np.zeros(xpshape, dtype=dy.dtype)
        for i in range(ph):
            for j in range(pw):
                routed = np.where(arg == i * pw + j, dy, 0)
                dxp[:, i:i + s * ho:s, j:j + s * wo:s, :] += routed
        (pt, _), (pl, _) = pads
        return dxp[:, pt:pt + h, pl:pl + w, :]


class UpSample(Layer):
    """Nearest-neighbour upsampling by an integer factor."""

    def __init__(self, factor):
        super().__init__()
        self.factor = factor

    def output_shape(self, shape):
        _require_rank(self, shape, 3)
        return (shape[0] * self.factor, shape[1] * self.factor, shape[2])

    def forward(self, x, train=False, rng=None):
        self._cache = x.shape
        f = self.factor
        return x.repeat(f, axis=1).repeat(f, axis=2)

    def backward(self, dy):
        n, h, w, c = self._take_cache()
        f = self.factor
        return dy.reshape(n, h, f, w, f, c).sum(axis=(2, 4))


class Flatten(Layer):
    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, train=False, rng=None):
        self._cache = x.shape
        return x.reshape(len(x), -1)

    def backward(self, dy):
        return dy.reshape(self._take_cache())


class Reshape(Layer):
    def __init__(self, target):
        super().__init__()
        self.target = tuple(target)

    def output_shape(self, shape):
        if int(np.prod(shape)) != int(np.prod(self.target)):
            raise ShapeError(f"cannot reshape {tuple(shape)} to {self.target}")
        return self.target

    def forward(self, x, train=False, rng=None):
        self._cache = x.shape
        return x.reshape(len(x), *self.target)

    def backward(self, dy):
        return dy.reshape(self._take_cache())


class Dense(Layer):
    def __init__(self, units):
        super().__init__()
        self.units = units

    def output_shape(self, shape):
        _require_rank(self, shape, 1)
        return (self.units,)

    def build(self, shape, rng, dtype):
        self.params["W"] = _uniform_fan_in(rng, (shape[0], self.units), shape[0], dtype)
        self.params["b"] = np.zeros(self.units, dtype=dtype)

    def forward(self, x, train=False, rng=None):
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        x = self._take_cache()
        self.grads["W"] = x.T @ dy
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.params["W"].T


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        self._cache = x > 0
        return np.where(self._cache, x, 0).astype(x.dtype, copy=False)

    def backward(self, dy):
        return np.where(self._take_cache(), dy, 0).astype(dy.dtype, copy=False)


class Sigmoid(Layer):
    def forward(self, x, train=False, rng=None):
        y = expit(x)
        self._cache = y
        return y

    def backward(self, dy):
        y = self._take_cache()
        return dy * y * (1 - y)


class Tanh(Layer):
    def forward(self, x, train=False, rng=None):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, dy):
        y = self._take_cache()
        return dy * (1 - y * y)


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-rate) in training mode."""

    def __init__(self, rate):
        super().__init__()
        if not 0 <= rate < 1:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0:
            self._cache = None
            return x
        if rng is None:
            raise StateError("dropout in training mode needs a random generator")
        keep = rng.random(x.shape) >= self.rate
        scale = np.asarray(1.0 / (1.0 - self.rate), dtype=x.dtype)
        self._cache = keep * scale
        return x * self._cache

    def backward(self, dy):
        if self._cache is None:
            return dy
        return dy * self._take_cache()
