"""The two autoencoders: classic (all trainable) and quanvolutional.

The quanvolutional variant is the classic network with its first three
layers (conv, ReLU, pool) removed; its input is the pre-computed quantum
layer output, which has the same shape those three layers produce.
"""

from quanvae.errors import ConfigError
from quanvae.neural.network import LayerSpec, NetworkSpec, conv, maxpool

FRONT_LAYERS = 3

IMAGE_SHAPES = {"mnist": (28, 28, 1), "cifar10": (32, 32, 3)}
QUANV_SHAPES = {"mnist": (7, 7, 16), "cifar10": (8, 8, 48)}
BOTTLENECKS = {"mnist": (2, 64), "cifar10": (2, 128)}


def _front(dataset):
    filters = QUANV_SHAPES[dataset][2]
    return [conv(filters, 4), LayerSpec("ReLU"), maxpool(4)]


def _tail(dataset, bottleneck):
    encoder = [
        conv(24, 3), LayerSpec("ReLU"),
        conv(12, 2), LayerSpec("ReLU"),
        maxpool(2),
        LayerSpec("Flatten"),
        LayerSpec("Dropout", rate=0.2),
        LayerSpec("Dense", units=192),
        LayerSpec("Dense", units=bottleneck),
        LayerSpec("Tanh"),
    ]
    decoder = [
        LayerSpec("Dense", units=192),
        LayerSpec("Reshape", target=(4, 4, 12)),
        conv(12, 2), LayerSpec("ReLU"),
        LayerSpec("UpSample", factor=2),
    ]
    channels = IMAGE_SHAPES[dataset][2]
    if dataset == "cifar10":
        decoder += [
            conv(24, 3), LayerSpec("ReLU"),
            conv(48, 1), LayerSpec("ReLU"),
            LayerSpec("UpSample", factor=4),
        ]
    else:
        # 8x8 -> 7x7 by an unpadded 2x2 conv, so the 4x upsample lands on 28x28
        decoder += [
            conv(24, 2, padding="none"), LayerSpec("ReLU"),
            conv(16, 1), LayerSpec("ReLU"),
            LayerSpec("UpSample", factor=4),
        ]
    decoder += [conv(channels, 4), LayerSpec("Sigmoid")]
    return encoder, decoder


def autoencoder(variant: str, dataset: str, bottleneck: int) -> NetworkSpec:
    if dataset not in IMAGE_SHAPES:
        raise ConfigError(f"unknown dataset {dataset!r}")
    if variant not in ("classic", "quanv"):
        raise ConfigError(f"unknown variant {variant!r}")
    if bottleneck < 1:
        raise ConfigError(f"bottleneck must be positive, got {bottleneck}")
    encoder, decoder = _tail(dataset, bottleneck)
    if variant == "classic":
        layers = _front(dataset) + encoder + decoder
        input_shape = IMAGE_SHAPES[dataset]
    else:
        layers = encoder + decoder
        input_shape = QUANV_SHAPES[dataset]
    return NetworkSpec(
        layers=tuple(layers),
        input_shape=input_shape,
        bottleneck_width=bottleneck,
        output_shape=IMAGE_SHAPES[dataset],
        latent_index=len(layers) - len(decoder) - 1,
        name=f"{variant}-{dataset}-z{bottleneck}",
    )
