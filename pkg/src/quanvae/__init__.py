"""Quanvolutional autoencoders: a state-vector simulator, a random-circuit
quanvolution front end and a small numpy autoencoder stack."""

from .circuit import CircuitSpec, generate_random_circuit, run_circuit
from .errors import QuanvaeError
from .qsim import Gate, StateVector
from .quanvolve import QuanvConfig, quanvolve_batch, quanvolve_dataset, quanvolve_image

__version__ = "0.1.0"

__all__ = [
    "CircuitSpec",
    "Gate",
    "QuanvConfig",
    "QuanvaeError",
    "StateVector",
    "generate_random_circuit",
    "quanvolve_batch",
    "quanvolve_dataset",
    "quanvolve_image",
    "run_circuit",
]
