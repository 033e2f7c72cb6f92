from quanvae.neural.adam import Adam
from quanvae.neural.models import autoencoder
from quanvae.neural.network import LayerSpec, Network, NetworkSpec, bce_grad, bce_loss, check_shapes
from quanvae.neural.training import RunRecord, evaluate, train

__all__ = [
    "Adam", "LayerSpec", "Network", "NetworkSpec", "RunRecord",
    "autoencoder", "bce_grad", "bce_loss", "check_shapes", "evaluate", "train",
]
