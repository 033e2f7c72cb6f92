from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from quanvae.errors import NumericError, ShapeError
from quanvae.neural.adam import Adam
from quanvae.neural.network import Network, bce_grad, bce_loss

log = logging.getLogger(__name__)


@dataclass
class RunRecord:
    variant: str
    dataset: str
    bottleneck: int
    seed: int
    initial_loss: float = float("nan")
    losses: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)


def evaluate(net: Network, inputs, targets, batch_size=256) -> float:
    """Mean BCE over the whole set in eval mode (dropout off)."""
    total = 0.0
    count = 0
    for start in range(0, len(inputs), batch_size):
        pred = net.forward(inputs[start:start + batch_size])
        tgt = targets[start:start + batch_size]
        total += bce_loss(pred, tgt) * pred.size
        count += pred.size
    return total / count


def init_output_bias(net: Network, targets) -> None:
    """Set the bias feeding a final Sigmoid to the logit of the per-channel target mean.

    Without this the decoder spends its first few dozen Adam steps pulling
    the output from 0.5 towards the mean pixel, and a narrow tanh bottleneck
    gets driven into saturation doing it.
    """
    if len(net.layers) < 2 or type(net.layers[-1]).__name__ != "Sigmoid" or "b" not in net.layers[-2].params:
        return
    bias = net.layers[-2].params["b"]
    mean = np.asarray(targets, dtype=np.float64).reshape(-1, bias.shape[0]).mean(axis=0)
    mean = np.clip(mean, 1e-3, 1 - 1e-3)
    bias[:] = np.log(mean / (1 - mean))


def train(net: Network, inputs, targets, epochs: int, batch_size: int = 32, seed: int = 0,
          lr: float = 1e-3, record: RunRecord | None = None, output_bias_init: bool = True) -> RunRecord:
    """Minibatch Adam on BCE reconstruction loss.

    ``initial_loss`` is measured before the first update and ``losses[e]``
    after epoch ``e + 1``, both in eval mode over the full training set, so
    they do not depend on dropout masks and a zero learning rate gives a
    constant curve.
    """
    if len(inputs) != len(targets):
        raise ShapeError(f"{len(inputs)} inputs but {len(targets)} targets")
    inputs = np.asarray(inputs, dtype=net.dtype)
    targets = np.asarray(targets, dtype=net.dtype)
    if record is None:
        record = RunRecord("", "", net.spec.bottleneck_width or 0, seed)
    shuffle_ss, dropout_ss = np.random.SeedSequence(seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)
    if output_bias_init:
        init_output_bias(net, targets)
    record.initial_loss = evaluate(net, inputs, targets)
    opt = Adam(lr=lr)
    params = [p for _, _, p in net.parameters()]
    n = len(inputs)
    for epoch in range(epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n)
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            pred = net.forward(inputs[idx], train=True, rng=dropout_rng)
            loss = bce_loss(pred, targets[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, batch {b}")
            net.backward(bce_grad(pred, targets[idx]))
            try:
                opt.step(params, net.gradients())
            except NumericError as exc:
                raise NumericError(f"{exc} at epoch {epoch + 1}, batch {b}") from exc
        epoch_loss = evaluate(net, inputs, targets)
        if not np.isfinite(epoch_loss):
            raise NumericError(f"non-finite loss after epoch {epoch + 1}")
        record.losses.append(epoch_loss)
        record.epoch_seconds.append(time.perf_counter() - t0)
        log.info("seed %d epoch %d loss %.6f (%.1fs)", seed, epoch + 1, epoch_loss, record.epoch_seconds[-1])
    return record
