import os
import struct
import time
from pathlib import Path

import numpy as np
import pytest

from quanvae.qsim import rotation_matrix

REPO = Path(__file__).resolve().parent.parent
DATA_CACHE = REPO / "tests" / ".data"


def write_idx(path, array, magic):
    array = np.asarray(array, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">i", magic))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(array.tobytes())


def write_mnist_dir(directory, train_images, train_labels, test_images, test_labels):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_idx(directory / "train-images-idx3-ubyte", train_images, 2051)
    write_idx(directory / "train-labels-idx1-ubyte", train_labels, 2049)
    write_idx(directory / "t10k-images-idx3-ubyte", test_images, 2051)
    write_idx(directory / "t10k-labels-idx1-ubyte", test_labels, 2049)
    return directory


def real_mnist_dir():
    """Directory of real MNIST IDX files.

    ``QUANVAE_MNIST_DIR`` wins when set. Otherwise the 5000-digit MNIST
    sample bundled with mlxtend is split 4000/1000 into train/test IDX files.
    """
    env = os.environ.get("QUANVAE_MNIST_DIR")
    if env:
        return Path(env)
    target = DATA_CACHE / "mnist"
    if (target / "t10k-labels-idx1-ubyte").exists():
        return target
    mlxtend_data = pytest.importorskip("mlxtend.data")
    X, y = mlxtend_data.mnist_data()
    X = X.astype(np.uint8).reshape(-1, 28, 28)
    y = y.astype(np.uint8)
    return write_mnist_dir(target, X[:4000], y[:4000], X[4000:], y[4000:])


@pytest.fixture(scope="session")
def mnist_dir():
    return real_mnist_dir()


@pytest.fixture
def toy_mnist_dir(tmp_path):
    rng = np.random.default_rng(7)
    train = rng.integers(0, 256, size=(40, 28, 28), dtype=np.uint8)
    test = rng.integers(0, 256, size=(12, 28, 28), dtype=np.uint8)
    return write_mnist_dir(tmp_path / "mnist", train, rng.integers(0, 10, 40), test, rng.integers(0, 10, 12))


def dense_gate(gate, n):
    """Full 2^n x 2^n unitary of one gate, wire 0 most significant."""
    dim = 1 << n
    if gate.kind == "CNOT":
        U = np.zeros((dim, dim))
        for i in range(dim):
            j = i
            if (i >> (n - 1 - gate.control)) & 1:
                j = i ^ (1 << (n - 1 - gate.target))
            U[j, i] = 1.0
        return U
    U = np.ones((1, 1))
    for w in range(n):
        U = np.kron(U, rotation_matrix(gate.kind, gate.angle) if w == gate.target else np.eye(2))
    return U


def dense_run(gates, n, psi=None):
    if psi is None:
        psi = np.zeros(1 << n, dtype=complex)
        psi[0] = 1
    for g in gates:
        psi = dense_gate(g, n) @ psi
    return psi


def dense_z(psi, n):
    p = np.abs(psi) ** 2
    idx = np.arange(len(p))
    return np.array([np.sum(p * np.where((idx >> (n - 1 - w)) & 1, -1.0, 1.0)) for w in range(n)])


def numeric_grad(f, arr, h=1e-3):
    """Central differences of scalar f() with respect to every entry of arr (perturbed in place)."""
    g = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def grad_mismatch(analytic, numeric, floor=1e-6):
    """Largest relative error over entries where either gradient exceeds floor."""
    analytic = np.asarray(analytic, dtype=np.float64)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    mask = scale > floor
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(analytic - numeric)[mask] / scale[mask]))


def check_network_gradients(net, x, target, h=1e-3, train=False):
    """Worst relative error over the input and every parameter of net under BCE loss.

    In training mode every forward pass redraws the same dropout mask.
    """
    from quanvae.neural import bce_grad, bce_loss

    def forward():
        return net.forward(x, train=train, rng=np.random.default_rng(0))

    def loss():
        return bce_loss(forward(), target)

    pred = forward()
    dx = net.backward(bce_grad(pred, target))
    worst = {"input": grad_mismatch(dx, numeric_grad(loss, x, h))}
    analytic = net.gradients()
    for (i, name, p), g in zip(net.parameters(), analytic):
        worst[f"{i}.{name}"] = grad_mismatch(g, numeric_grad(loss, p, h))
    return worst


SUBSET_SIZE = 2000
SUBSET_ID = f"mnist:train:limit={SUBSET_SIZE}:subset_seed=0"  # matches the CLI's dataset id
QCACHE = DATA_CACHE / "qcache"


@pytest.fixture(scope="session")
def mnist_subset(mnist_dir):
    from quanvae import data

    return data.subset(data.load_mnist(mnist_dir, "train"), SUBSET_SIZE, 0)


@pytest.fixture(scope="session")
def mnist_quanvolved(mnist_subset):
    """Quanvolved subset, read from the persistent cache (computed once, several minutes)."""
    from quanvae.circuit import generate_random_circuit
    from quanvae.quanvolve import QuanvConfig, quanvolve_dataset

    cfg = QuanvConfig(generate_random_circuit(16, 2, 42))
    return quanvolve_dataset(mnist_subset.images, cfg, QCACHE, SUBSET_ID)


# acceptance criterion number -> (passed, detail); printed at the end of the session
ACCEPTANCE = {}


def report(number, passed, detail, started=None):
    if started is not None:
        detail += f" [{time.perf_counter() - started:.1f}s]"
    ACCEPTANCE[number] = (bool(passed), detail)
    assert passed, detail


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
