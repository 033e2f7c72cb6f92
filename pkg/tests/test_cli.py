import csv

import numpy as np
import pytest

from quanvae import artifacts, circuit, cli, data, quanvolve
from quanvae.neural import Network, NetworkSpec
from quanvae.neural.checkpoint import save_checkpoint

from conftest import write_idx


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def quanv_cache(tmp_path, toy_mnist_dir, capsys):
    cache = tmp_path / "cache"
    code, out, _ = run(capsys, "quanvolve", "--data-dir", toy_mnist_dir, "--limit", 4, "--cache-dir", cache)
    assert code == 0
    return cache, out


def test_quanvolve_then_cache_hit(quanv_cache, toy_mnist_dir, capsys):
    cache, out = quanv_cache
    assert "computed" in out and f"circuit evaluations: {4 * 49}" in out
    tensor_file = next(cache.glob("*.qtn"))
    first = tensor_file.read_bytes()
    before = quanvolve.evaluation_count()
    code, out, _ = run(capsys, "quanvolve", "--data-dir", toy_mnist_dir, "--limit", 4, "--cache-dir", cache)
    assert code == 0
    assert "cache hit" in out and "circuit evaluations: 0" in out
    assert quanvolve.evaluation_count() == before
    assert tensor_file.read_bytes() == first
    assert "shape [4, 7, 7, 16]" in out


def test_quanvolve_writes_circuit_and_manifest(quanv_cache):
    cache, out = quanv_cache
    key = out.split("cache key: ")[1].split()[0]
    assert circuit.load(cache / f"{key}.circuit") == circuit.generate_random_circuit(16, 2, 42)
    meta = artifacts.read_manifest(cache / f"{key}.qtn.manifest")
    assert meta["circuit_seed"] == "42" and meta["shape"] == "4x7x7x16" and meta["config_hash"]


def test_circuit_seed_changes_key(quanv_cache, toy_mnist_dir, capsys):
    cache, out = quanv_cache
    code, out2, _ = run(capsys, "quanvolve", "--data-dir", toy_mnist_dir, "--limit", 1,
                        "--circuit-seed", 7, "--cache-dir", cache)
    assert code == 0 and "computed" in out2
    assert out.split()[2] != out2.split()[2]


def test_patch_size_must_match_circuit(tmp_path, toy_mnist_dir, capsys):
    circuit.save(circuit.generate_random_circuit(16, 2, 1), tmp_path / "u.txt")
    code, _, err = run(capsys, "quanvolve", "--data-dir", toy_mnist_dir, "--patch", 3,
                       "--circuit", tmp_path / "u.txt", "--cache-dir", tmp_path / "c")
    assert code == 2 and "error:" in err


def test_malformed_circuit_file(tmp_path, toy_mnist_dir, capsys):
    (tmp_path / "u.txt").write_text("# qubits=16 depth=2 seed=0\nRQ 0 1.0\n")
    code, _, err = run(capsys, "quanvolve", "--data-dir", toy_mnist_dir, "--circuit", tmp_path / "u.txt",
                       "--cache-dir", tmp_path / "c")
    assert code == 3 and "line 2" in err


def test_bad_magic_exit_code(toy_mnist_dir, tmp_path, capsys):
    write_idx(toy_mnist_dir / "train-images-idx3-ubyte", np.zeros((2, 28, 28)), 2052)
    code, _, err = run(capsys, "quanvolve", "--data-dir", toy_mnist_dir, "--cache-dir", tmp_path)
    assert code == 3 and "2052" in err


def test_missing_data_dir_is_config_error(tmp_path, capsys):
    code, _, _ = run(capsys, "train", "--variant", "classic", "--data-dir", tmp_path / "nope", "--out", tmp_path / "o")
    assert code == 2


def test_train_quanv_without_cache(tmp_path, toy_mnist_dir, capsys):
    code, _, err = run(capsys, "train", "--variant", "quanv", "--data-dir", toy_mnist_dir, "--limit", 4,
                       "--cache-dir", tmp_path / "empty", "--out", tmp_path / "o")
    assert code == 2 and "quanvae quanvolve" in err


@pytest.mark.parametrize("bottleneck", [2, 64])
def test_train_classic(tmp_path, toy_mnist_dir, capsys, bottleneck):
    out = tmp_path / "run"
    code, _, _ = run(capsys, "train", "--variant", "classic", "--data-dir", toy_mnist_dir, "--limit", 16,
                     "--bottleneck", bottleneck, "--epochs", 2, "--batch", 8, "--seeds", 2, "--out", out)
    assert code == 0
    rows = read_csv(out / "losses.csv")
    assert [r["epoch"] for r in rows] == ["0", "1", "2"]
    assert all(float(r["std_loss"]) > 0 for r in rows)
    runs = read_csv(out / "runs.csv")
    assert list(runs[0]) == ["seed", "epoch", "loss"] and len(runs) == 6
    assert len(read_csv(out / "timings.csv")) == 4
    for name in ("losses.csv", "runs.csv"):
        meta = artifacts.read_manifest(out / f"{name}.manifest")
        assert meta["seeds"] == "0,1" and meta["bottleneck"] == str(bottleneck)
    ck = artifacts.read_manifest(out / "seed-1" / "manifest.txt")
    assert ck["seed"] == "1" and ck["config_hash"]


def test_train_quanv_and_latent(quanv_cache, tmp_path, toy_mnist_dir, capsys):
    cache, _ = quanv_cache
    out = tmp_path / "q"
    code, _, _ = run(capsys, "train", "--variant", "quanv", "--data-dir", toy_mnist_dir, "--limit", 4,
                     "--cache-dir", cache, "--epochs", 1, "--seeds", 1, "--out", out)
    assert code == 0
    assert (out / "seed-0" / cli.CIRCUIT_FILE).exists()
    assert artifacts.read_manifest(out / "runs.csv.manifest")["circuit_seed"] == "42"
    lat = tmp_path / "z.csv"
    code, _, _ = run(capsys, "latent", "--checkpoint", out / "seed-0", "--out", lat, "--limit", 3)
    assert code == 0
    rows = read_csv(lat)
    assert list(rows[0]) == ["label", "z_1", "z_2"] and len(rows) == 3


def test_train_cifar_bottleneck_128(tmp_path, monkeypatch, capsys):
    record = bytes([4]) + bytes(range(256)) * 12
    for name in [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]:
        (tmp_path / name).write_bytes(record * 2)
    real = data.load
    monkeypatch.setattr(cli.data, "load", lambda name, d, split="train":
                        data.load_cifar10(d, split, records_per_file=2) if name == "cifar10" else real(name, d, split))
    code, out, _ = run(capsys, "train", "--variant", "classic", "--dataset", "cifar10", "--data-dir", tmp_path,
                       "--bottleneck", 128, "--epochs", 1, "--seeds", 1, "--out", tmp_path / "o")
    assert code == 0
    assert artifacts.read_manifest(tmp_path / "o" / "seed-0" / "manifest.txt")["bottleneck"] == "128"
    code, _, _ = run(capsys, "reconstruct", "--checkpoint", tmp_path / "o" / "seed-0", "--n", 2, "--out", tmp_path / "r")
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "r").iterdir() if p.suffix == ".ppm") == \
        ["original-000.ppm", "original-001.ppm", "recon-000.ppm", "recon-001.ppm"]


def test_bottleneck_choices(tmp_path, toy_mnist_dir, capsys):
    with pytest.raises(SystemExit):
        cli.main(["train", "--variant", "classic", "--data-dir", str(toy_mnist_dir), "--bottleneck", "3",
                  "--out", str(tmp_path)])


@pytest.fixture
def trained(tmp_path, toy_mnist_dir, capsys):
    out = tmp_path / "run"
    code, _, _ = run(capsys, "train", "--variant", "classic", "--data-dir", toy_mnist_dir, "--limit", 8,
                     "--epochs", 1, "--seeds", 1, "--out", out)
    assert code == 0
    return out / "seed-0"


def test_reconstruct(trained, tmp_path, capsys):
    out = tmp_path / "recon"
    code, _, _ = run(capsys, "reconstruct", "--checkpoint", trained, "--n", 5, "--out", out)
    assert code == 0
    images = sorted(p for p in out.iterdir() if p.suffix == ".pgm")
    assert len(images) == 10
    for p in images:
        assert artifacts.read_pnm(p).shape == (28, 28)
    meta = artifacts.read_manifest(artifacts.sidecar(out))
    assert meta["seed"] == "0" and meta["n"] == "5"


def test_latent_is_deterministic_and_bounded(trained, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(capsys, "latent", "--checkpoint", trained, "--out", path)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert len(rows) == 12 and list(rows[0]) == ["label", "z_1", "z_2"]
    assert all(abs(float(r[k])) <= 1 for r in rows for k in ("z_1", "z_2"))
    assert (tmp_path / "a.csv.manifest").exists()


def test_identity_network_reconstructs_exactly(tmp_path, toy_mnist_dir, capsys):
    spec = NetworkSpec(layers=(), input_shape=(28, 28, 1), output_shape=(28, 28, 1))
    ck = save_checkpoint(tmp_path / "id", Network(spec), {
        "variant": "classic", "dataset": "mnist", "data_dir": str(toy_mnist_dir)})
    code, _, _ = run(capsys, "reconstruct", "--checkpoint", ck, "--n", 3, "--out", tmp_path / "r")
    assert code == 0
    for i in range(3):
        assert (tmp_path / "r" / f"original-{i:03d}.pgm").read_bytes() == \
            (tmp_path / "r" / f"recon-{i:03d}.pgm").read_bytes()


def test_reconstruct_rejects_mismatched_checkpoint(tmp_path, toy_mnist_dir, capsys):
    spec = NetworkSpec(layers=(), input_shape=(32, 32, 3), output_shape=(32, 32, 3))
    ck = save_checkpoint(tmp_path / "bad", Network(spec), {
        "variant": "classic", "dataset": "mnist", "data_dir": str(toy_mnist_dir)})
    code, _, _ = run(capsys, "reconstruct", "--checkpoint", ck, "--out", tmp_path / "r")
    assert code == 2


def test_compare(tmp_path, capsys):
    for name, losses in (("c", [0.20, 0.22, 0.21]), ("q", [0.19, 0.20, 0.23])):
        d = tmp_path / name
        d.mkdir()
        artifacts.write_csv(d / "runs.csv", ["seed", "epoch", "loss"],
                            [[s, e, 0.5 if e == 0 else v] for s, v in enumerate(losses) for e in (0, 1)])
        artifacts.write_manifest(d / "runs.csv.manifest", {"config_hash": name})
    code, _, _ = run(capsys, "compare", "--classic", tmp_path / "c", "--quanv", tmp_path / "q", "--out", tmp_path / "t.csv")
    assert code == 0
    rows = {r["run"]: r for r in read_csv(tmp_path / "t.csv")}
    assert float(rows["classic"]["final_mean_loss"]) == pytest.approx(0.21)
    assert float(rows["quanv"]["final_mean_loss"]) == pytest.approx(0.62 / 3)
    gap = np.array([0.20, 0.22, 0.21]) - np.array([0.19, 0.20, 0.23])
    assert float(rows["classic_minus_quanv"]["final_mean_loss"]) == pytest.approx(gap.mean())
    assert float(rows["classic_minus_quanv"]["final_std_loss"]) == pytest.approx(gap.std(ddof=1))


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "quanvae", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "quanvolve" in res.stdout
