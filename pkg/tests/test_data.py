import gzip
import struct

import numpy as np
import pytest

from quanvae import data, tensorio
from quanvae.errors import ConfigError, DataFormatError

from conftest import write_idx, write_mnist_dir


def one_digit_dir(tmp_path):
    image = np.zeros((1, 28, 28), np.uint8)
    image[0, 0, 0] = 255
    image[0, 27, 27] = 1
    image[0, 13, 5] = 128
    return write_mnist_dir(tmp_path, image, [7], image, [7]), image


def test_one_record_idx_is_exact(tmp_path):
    directory, raw = one_digit_dir(tmp_path)
    h = data.load_mnist(directory, "train")
    assert h.images.shape == (1, 28, 28, 1) and h.images.dtype == np.float32
    assert h.labels.tolist() == [7]
    assert h.images[0, 0, 0, 0] == 1.0
    assert h.images[0, 27, 27, 0] == np.float32(1) / np.float32(255)
    assert h.images[0, 13, 5, 0] == np.float32(128) / np.float32(255)
    assert np.count_nonzero(h.images) == 3


def test_idx_bytes_are_big_endian(tmp_path):
    blob = struct.pack(">iIII", 2051, 1, 2, 3) + bytes([0, 51, 102, 153, 204, 255])
    arr = data.parse_idx(blob, 2051)
    assert arr.tolist() == [[[0, 51, 102], [153, 204, 255]]]


def test_gzip_files_are_read(tmp_path):
    directory, raw = one_digit_dir(tmp_path)
    for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        path = directory / name
        (directory / (name + ".gz")).write_bytes(gzip.compress(path.read_bytes()))
        path.unlink()
    assert data.load_mnist(directory, "train").images[0, 0, 0, 0] == 1.0


def test_bad_magic(tmp_path):
    directory, raw = one_digit_dir(tmp_path)
    write_idx(directory / "train-images-idx3-ubyte", raw, 2052)
    with pytest.raises(DataFormatError, match="2052") as info:
        data.load_mnist(directory, "train")
    assert info.value.exit_code == 3


def test_truncated_idx(tmp_path):
    directory, raw = one_digit_dir(tmp_path)
    path = directory / "t10k-images-idx3-ubyte"
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(DataFormatError) as info:
        data.load_mnist(directory, "test")
    assert info.value.exit_code == 3


def test_label_count_mismatch(tmp_path):
    directory, raw = one_digit_dir(tmp_path)
    write_idx(directory / "train-labels-idx1-ubyte", [1, 2], 2049)
    with pytest.raises(DataFormatError):
        data.load_mnist(directory, "train")


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        data.load_mnist(tmp_path, "train")
    with pytest.raises(ConfigError):
        data.load_mnist(tmp_path, "validation")


def cifar_record(label, r, g, b):
    return bytes([label]) + bytes(r) * 1024 + bytes(g) * 1024 + bytes(b) * 1024


def test_cifar_planes_become_channels():
    blob = cifar_record(3, [255], [0], [51])
    images, labels = data.parse_cifar_batch(blob, expected_records=1)
    assert labels.tolist() == [3]
    assert images.shape == (1, 32, 32, 3)
    assert np.all(images[..., 0] == 255) and np.all(images[..., 1] == 0) and np.all(images[..., 2] == 51)


def test_cifar_row_major_layout():
    rng = np.random.default_rng(0)
    planes = rng.integers(0, 256, size=(3, 32, 32), dtype=np.uint8)
    images, _ = data.parse_cifar_batch(bytes([9]) + planes.tobytes(), expected_records=None)
    for c in range(3):
        np.testing.assert_array_equal(images[0, :, :, c], planes[c])


def cifar_dir(tmp_path, records=1):
    for name in [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]:
        (tmp_path / name).write_bytes(cifar_record(1, [255], [0], [0]) * records)
    return tmp_path


def test_load_cifar(tmp_path):
    h = data.load_cifar10(cifar_dir(tmp_path), "train", records_per_file=1)
    assert h.images.shape == (5, 32, 32, 3)
    assert np.all(h.images[..., 0] == 1.0) and not np.any(h.images[..., 1:])
    assert h.labels.tolist() == [1] * 5
    test = data.load_cifar10(tmp_path, "test", records_per_file=None)
    assert len(test) == 1


def test_cifar_standard_record_count_enforced(tmp_path):
    with pytest.raises(DataFormatError, match="expected 10000"):
        data.load_cifar10(cifar_dir(tmp_path), "test")


def test_cifar_truncated_record_offset():
    blob = cifar_record(0, [1], [2], [3]) * 2
    with pytest.raises(DataFormatError, match="byte offset 3073") as info:
        data.parse_cifar_batch(blob[:-100], expected_records=None)
    assert info.value.exit_code == 3


def test_to_unit():
    np.testing.assert_array_equal(data.to_unit(np.array([0, 255], np.uint8)), [0.0, 1.0])


def test_subset(toy_mnist_dir):
    h = data.load_mnist(toy_mnist_dir, "train")
    a = data.subset(h, 10, seed=3)
    b = data.subset(h, 10, seed=3)
    np.testing.assert_array_equal(a.images, b.images)
    assert len(data.subset(h, 0)) == 0
    assert len(data.subset(h, 40)) == 40
    assert not np.array_equal(data.subset(h, 10, seed=4).labels, a.labels) or \
        not np.array_equal(data.subset(h, 10, seed=4).images, a.images)
    for n in (-1, 41):
        with pytest.raises(ConfigError):
            data.subset(h, n)


def test_dispatch(toy_mnist_dir):
    assert data.load("mnist", toy_mnist_dir, "test").images.shape == (12, 28, 28, 1)
    with pytest.raises(ConfigError):
        data.load("svhn", toy_mnist_dir)


def test_loaded_images_survive_tensor_file(tmp_path, toy_mnist_dir):
    images = data.load_mnist(toy_mnist_dir, "test").images
    tensorio.save(tmp_path / "x.qtn", images)
    assert tensorio.load(tmp_path / "x.qtn").tobytes() == images.tobytes()
