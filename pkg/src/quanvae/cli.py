"""Command line entry point: ``quanvae {quanvolve,train,reconstruct,latent,compare}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from quanvae import artifacts, circuit, data, quanvolve
from quanvae.errors import ConfigError, QuanvaeError, StateError
from quanvae.neural import Network, autoencoder, train
from quanvae.neural.checkpoint import load_checkpoint, save_checkpoint
from quanvae.quanvolve import QuanvConfig

log = logging.getLogger("quanvae")

CIRCUIT_FILE = "circuit.txt"


def _add_data_args(p, split="train"):
    p.add_argument("--dataset", choices=["mnist", "cifar10"], default="mnist")
    p.add_argument("--data-dir", required=True, type=Path)
    p.add_argument("--split", choices=["train", "test"], default=split)
    p.add_argument("--limit", type=int, default=None, help="use a seeded subset of this many images")
    p.add_argument("--subset-seed", type=int, default=0)


def _add_circuit_args(p):
    p.add_argument("--patch", type=int, default=4)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--depth", type=int, default=circuit.DEFAULT_DEPTH)
    p.add_argument("--circuit-seed", type=int, default=circuit.DEFAULT_SEED)
    p.add_argument("--circuit", type=Path, default=None, help="circuit file; overrides --depth/--circuit-seed")
    p.add_argument("--cache-dir", type=Path, default=Path("quanv-cache"))


def _load_images(args):
    handle = data.load(args.dataset, args.data_dir, args.split)
    dataset_id = f"{args.dataset}:{args.split}"
    if args.limit is not None:
        handle = data.subset(handle, args.limit, args.subset_seed)
        dataset_id += f":limit={args.limit}:subset_seed={args.subset_seed}"
    return handle, dataset_id


def _quanv_config(args) -> QuanvConfig:
    if args.circuit is not None:
        circ = circuit.load(args.circuit)
    else:
        circ = circuit.generate_random_circuit(args.patch * args.patch, args.depth, args.circuit_seed)
    return QuanvConfig(circ, patch_size=args.patch, stride=args.stride)


def _cfg_manifest(cfg: QuanvConfig) -> dict:
    return {
        "circuit_seed": cfg.circuit.seed,
        "circuit_depth": cfg.circuit.depth,
        "circuit_rng": cfg.circuit.rng,
        "patch": cfg.patch_size,
        "stride": cfg.stride,
    }


def cmd_quanvolve(args) -> int:
    cfg = _quanv_config(args)
    handle, dataset_id = _load_images(args)
    key = quanvolve.cache_key(handle.images, cfg, dataset_id)
    before = quanvolve.evaluation_count()
    tensor = quanvolve.quanvolve_dataset(handle.images, cfg, args.cache_dir, dataset_id)
    evals = quanvolve.evaluation_count() - before
    path = quanvolve.cache_path(args.cache_dir, key)
    circuit.save(cfg.circuit, args.cache_dir / f"{key}.circuit")
    meta = {"dataset": dataset_id, "cache_key": key, "shape": "x".join(map(str, tensor.shape))}
    meta.update(_cfg_manifest(cfg))
    meta["config_hash"] = artifacts.config_hash(meta)
    artifacts.write_manifest(artifacts.sidecar(path), meta)
    print(f"cache key: {key}")
    print(f"tensor: {path} shape {list(tensor.shape)}")
    print("cache hit" if evals == 0 else "computed")
    print(f"circuit evaluations: {evals}")
    return 0


def _summarize(records, epochs):
    losses = np.array([[r.initial_loss] + r.losses for r in records])
    mean = losses.mean(axis=0)
    std = losses.std(axis=0, ddof=1) if len(records) > 1 else np.zeros(epochs + 1)
    return mean, std


def cmd_train(args) -> int:
    handle, dataset_id = _load_images(args)
    targets = handle.images
    spec = autoencoder(args.variant, args.dataset, args.bottleneck)
    meta = {
        "variant": args.variant,
        "dataset": args.dataset,
        "data_dir": str(args.data_dir.resolve()),
        "train_subset": dataset_id,
        "epochs": args.epochs,
        "batch": args.batch,
        "lr": args.lr,
        "bottleneck": args.bottleneck,
    }
    cfg = None
    if args.variant == "quanv":
        cfg = _quanv_config(args)
        key = quanvolve.cache_key(handle.images, cfg, dataset_id)
        path = quanvolve.cache_path(args.cache_dir, key)
        if not path.exists():
            raise ConfigError(
                f"no quanvolved tensor cache at {path}; run `quanvae quanvolve` with the same "
                f"--dataset/--data-dir/--split/--limit/--subset-seed and circuit flags first"
            )
        inputs = quanvolve.quanvolve_dataset(handle.images, cfg, args.cache_dir, dataset_id)
        meta.update(_cfg_manifest(cfg))
        meta["cache_key"] = key
    else:
        inputs = targets
    seeds = list(range(args.seed_base, args.seed_base + args.seeds))
    meta["seeds"] = ",".join(map(str, seeds))
    meta["config_hash"] = artifacts.config_hash(meta)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in seeds:
        net = Network(spec, seed=seed)
        record = train(net, inputs, targets, epochs=args.epochs, batch_size=args.batch, seed=seed, lr=args.lr)
        record.variant, record.dataset = args.variant, args.dataset
        records.append(record)
        ckpt = save_checkpoint(out / f"seed-{seed}", net, {**meta, "seed": seed})
        if cfg is not None:
            circuit.save(cfg.circuit, ckpt / CIRCUIT_FILE)
        print(f"seed {seed}: initial {record.initial_loss:.6f} final {record.losses[-1]:.6f}")

    mean, std = _summarize(records, args.epochs)
    artifacts.write_csv(
        out / "losses.csv", ["epoch", "mean_loss", "std_loss"],
        [[e, repr(float(m)), repr(float(s))] for e, (m, s) in enumerate(zip(mean, std))],
    )
    # wall-clock time lives in its own file so the loss CSVs stay reproducible
    rows, timings = [], []
    for r in records:
        rows.append([r.seed, 0, repr(float(r.initial_loss))])
        for e, (loss, secs) in enumerate(zip(r.losses, r.epoch_seconds), start=1):
            rows.append([r.seed, e, repr(float(loss))])
            timings.append([r.seed, e, f"{secs:.3f}"])
    artifacts.write_csv(out / "runs.csv", ["seed", "epoch", "loss"], rows)
    artifacts.write_csv(out / "timings.csv", ["seed", "epoch", "seconds"], timings)
    for name in ("losses.csv", "runs.csv", "timings.csv"):
        artifacts.write_manifest(artifacts.sidecar(out / name), meta)
    print(f"wrote {out / 'losses.csv'}")
    return 0


def _checkpoint_inputs(args, meta, net):
    """Test images for a checkpoint plus the network inputs they map to."""
    data_dir = args.data_dir or Path(meta["data_dir"])
    handle = data.load(meta["dataset"], data_dir, args.split)
    if args.limit is not None:
        handle = data.DatasetHandle(handle.name, handle.split, handle.images[:args.limit], handle.labels[:args.limit])
    images = handle.images
    if meta.get("variant") == "quanv":
        circ_path = Path(args.checkpoint) / CIRCUIT_FILE
        if not circ_path.exists():
            raise StateError(f"quanvolutional checkpoint without {CIRCUIT_FILE}")
        cfg = QuanvConfig(circuit.load(circ_path), int(meta["patch"]), int(meta["stride"]))
        inputs = quanvolve.quanvolve_batch(images, cfg).astype(np.float32)
    else:
        inputs = images
    if tuple(inputs.shape[1:]) != net.spec.input_shape:
        raise StateError(
            f"checkpoint network expects {net.spec.input_shape}, data gives {tuple(inputs.shape[1:])}"
        )
    return handle, inputs


def cmd_reconstruct(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    args.limit = args.n
    handle, inputs = _checkpoint_inputs(args, meta, net)
    recon = net.forward(inputs)
    if recon.shape != handle.images.shape:
        raise StateError(f"reconstruction shape {recon.shape} != image shape {handle.images.shape}")
    ext = "ppm" if handle.images.shape[-1] == 3 else "pgm"
    args.out.mkdir(parents=True, exist_ok=True)
    for i, (orig, rec) in enumerate(zip(handle.images, recon)):
        artifacts.write_pnm(args.out / f"original-{i:03d}.{ext}", orig)
        artifacts.write_pnm(args.out / f"recon-{i:03d}.{ext}", rec)
    _write_derived_manifest(args.out, meta, args.checkpoint, n=len(recon))
    print(f"wrote {2 * len(recon)} images to {args.out}")
    return 0


def cmd_latent(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    handle, inputs = _checkpoint_inputs(args, meta, net)
    z = np.concatenate([net.latent(inputs[i:i + 256]) for i in range(0, len(inputs), 256)])
    header = ["label"] + [f"z_{j + 1}" for j in range(z.shape[1])]
    rows = [[int(label)] + [repr(float(v)) for v in row] for label, row in zip(handle.labels, z)]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    artifacts.write_csv(args.out, header, rows)
    _write_derived_manifest(args.out, meta, args.checkpoint, n=len(rows))
    print(f"wrote {len(rows)} latent vectors of width {z.shape[1]} to {args.out}")
    return 0


def _write_derived_manifest(target, meta, checkpoint, **extra):
    entries = {"checkpoint": str(Path(checkpoint).resolve())}
    for key in ("variant", "dataset", "seed", "circuit_seed", "circuit_depth", "config_hash"):
        if key in meta:
            entries[key] = meta[key]
    entries.update(extra)
    artifacts.write_manifest(artifacts.sidecar(target), entries)


def _final_losses(run_dir):
    with open(Path(run_dir) / "runs.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    last = max(int(r["epoch"]) for r in rows)
    return np.array([float(r["loss"]) for r in rows if int(r["epoch"]) == last])


def compare_runs(classic_dir, quanv_dir):
    """Rows of (label, mean final loss, std across seeds) plus the classic - quanv gap."""
    a = _final_losses(classic_dir)
    b = _final_losses(quanv_dir)
    std = lambda x: float(x.std(ddof=1)) if len(x) > 1 else 0.0
    if len(a) == len(b):
        gap = a - b
        gap_row = ["classic_minus_quanv", float(gap.mean()), std(gap)]
    else:
        gap_row = ["classic_minus_quanv", float(a.mean() - b.mean()), float(np.hypot(std(a), std(b)))]
    return [["classic", float(a.mean()), std(a)], ["quanv", float(b.mean()), std(b)], gap_row]


def cmd_compare(args) -> int:
    rows = compare_runs(args.classic, args.quanv)
    artifacts.write_csv(args.out, ["run", "final_mean_loss", "final_std_loss"],
                        [[r[0], repr(r[1]), repr(r[2])] for r in rows])
    artifacts.write_manifest(artifacts.sidecar(args.out), {
        "classic": str(Path(args.classic).resolve()),
        "quanv": str(Path(args.quanv).resolve()),
        **{f"{k}_config_hash": artifacts.read_manifest(artifacts.sidecar(Path(d) / "runs.csv")).get("config_hash", "")
           for k, d in (("classic", args.classic), ("quanv", args.quanv))},
    })
    for name, mean, sd in rows:
        print(f"{name:>20s}  {mean:.6f} +- {sd:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quanvae", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quanvolve", help="pre-compute the quantum layer for a dataset")
    _add_data_args(p)
    _add_circuit_args(p)
    p.set_defaults(func=cmd_quanvolve)

    p = sub.add_parser("train", help="train one autoencoder variant over several seeds")
    _add_data_args(p)
    _add_circuit_args(p)
    p.add_argument("--variant", choices=["classic", "quanv"], required=True)
    p.add_argument("--bottleneck", type=int, choices=[2, 64, 128], default=2)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("reconstruct", cmd_reconstruct, "write original and reconstructed test images"),
        ("latent", cmd_latent, "export bottleneck activations of test images"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", type=Path, required=True)
        p.add_argument("--data-dir", type=Path, default=None, help="override the dataset directory in the checkpoint")
        p.add_argument("--split", choices=["train", "test"], default="test")
        p.add_argument("--out", type=Path, required=True)
        if name == "reconstruct":
            p.add_argument("--n", type=int, default=10)
        else:
            p.add_argument("--limit", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="final-loss comparison table of two training runs")
    p.add_argument("--classic", type=Path, required=True)
    p.add_argument("--quanv", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except QuanvaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
