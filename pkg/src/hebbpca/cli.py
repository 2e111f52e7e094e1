"""Command-line interface: ``hebbpca {train,probe,retrain,inspect}``.

Exit codes: 0 success, 2 invalid arguments, 3 unreadable or mismatched
data/checkpoint files, 4 training divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import DatasetSplit, limit_split, load_cifar10, load_mnist_idx, synthetic_dataset
from .errors import BuildError, CheckpointError, DataFormatError, DivergenceError
from .network import (
    Network,
    TrainConfig,
    build_network,
    forward_to,
    resolve_spec,
    retrain_upper_layers,
    train_hebbian,
    train_probe_on_layer,
)
from .oracle import batch_pca, cosine_alignment
from .report import Report, add_train_report, convergence_epoch

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

SYNTHETIC_SIZES = (4000, 1000, 1000)


class UsageError(Exception):
    """Arguments are well-formed but not usable (exit 2)."""


class DataError(Exception):
    """Input files cannot be used (exit 3)."""


# -- argument parsing ----------------------------------------------------------


def _limits(text: str) -> tuple[int | None, int | None, int | None]:
    parts = text.split(",")
    if not 1 <= len(parts) <= 3:
        raise argparse.ArgumentTypeError("expected 1 to 3 comma-separated counts (train,val,test)")
    try:
        vals = [int(p) if p.strip() else None for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count list: {text!r}") from None
    if any(v is not None and v < 1 for v in vals):
        raise argparse.ArgumentTypeError("counts must be positive")
    return tuple(vals + [None] * (3 - len(vals)))


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=("cifar10", "mnist", "synthetic"), default="cifar10")
    p.add_argument("--data-dir", help="directory holding the dataset files (cifar10, mnist)")
    p.add_argument("--limit", type=_limits, help="per-split example counts, e.g. 5000,1000,2000")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--epochs", type=_positive_int, default=d.epochs)
    p.add_argument("--batch-size", type=_positive_int, default=d.batch_size)
    p.add_argument("--eta", type=_positive_float, default=d.eta_hebbian, help="Hebbian learning rate")
    p.add_argument("--eta-probe", type=_positive_float, default=d.eta_probe)
    p.add_argument("--l2", type=float, default=d.probe_l2, help="probe L2 penalty")
    p.add_argument("--no-early-stopping", action="store_true")
    p.add_argument("--greedy", action="store_true", help="train Hebbian layers one at a time")
    p.add_argument("--seed", type=int, default=0)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", help="report path (default: standard output)")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hebbpca", description="Hebbian PCA networks with linear probes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a spec")
    p.add_argument("--spec", default="reference", help='spec file, "reference" or "reference-dense"')
    p.add_argument("--out", help="checkpoint path")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("probe", help="fit linear probes on frozen features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layer", default="all", help='Hebbian layer index (1-based, 0 = input) or "all"')
    _add_data_flags(p)
    _add_train_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("retrain", help="re-initialize and retrain the upper layers")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--from-layer", type=int, required=True, help="number of lower Hebbian layers kept frozen")
    p.add_argument("--out", help="checkpoint path")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("inspect", help="write convolution filters as PGM/PPM images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layer", type=int, default=1, help="Hebbian layer index (1-based)")
    p.add_argument("--out-dir", required=True)
    return parser


def _config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, eta_hebbian=args.eta, eta_probe=args.eta_probe,
        probe_l2=args.l2, early_stopping=not args.no_early_stopping, greedy=args.greedy,
    )


# -- helpers -------------------------------------------------------------------


def load_dataset(args) -> DatasetSplit:
    if args.dataset == "synthetic":
        sizes = tuple(d if v is None else v for v, d in zip(args.limit or (None,) * 3, SYNTHETIC_SIZES))
        return synthetic_dataset(sizes, seed=args.seed)
    if not args.data_dir:
        raise UsageError(f"--data-dir is required for --dataset {args.dataset}")
    if args.dataset == "cifar10":
        return load_cifar10(args.data_dir, args.limit)
    return limit_split(load_mnist_idx(args.data_dir), args.limit)


def _check_shape(net: Network, data: DatasetSplit) -> None:
    if tuple(net.input_shape) != tuple(data.input_shape):
        raise DataError(f"checkpoint expects inputs {net.input_shape}, dataset {data.name} has {data.input_shape}")
    if net.probe.num_classes != data.num_classes:
        raise DataError(f"checkpoint probe has {net.probe.num_classes} classes, dataset has {data.num_classes}")


def _describe_run(rep: Report, command: str, args, data: DatasetSplit, net: Network) -> None:
    rep.set("command", command)
    rep.set("seed", args.seed)
    rep.set("dataset", data.name)
    rep.set("dataset.checksum", data.checksum)
    rep.set("dataset.sizes", list(data.sizes))
    rep.set("dataset.input_shape", list(data.input_shape))
    if data.name == "cifar10":
        rep.set("dataset.normalization", "per-channel standardization (train split)")
        rep.set("dataset.channel_mean", [float(v) for v in data.mean])
        rep.set("dataset.channel_std", [float(v) for v in data.std])
    else:
        rep.set("dataset.normalization", "none")
    for i, layer in enumerate(net.spec.layers):
        rep.set(f"spec.{i}", layer.to_line())


def first_layer_alignment(net: Network, images: np.ndarray) -> dict[str, object]:
    """|cos| between the first Hebbian layer's weights and the principal
    components of that layer's inputs (patches, for a conv layer)."""
    layer = net.hebbian[0]
    pos = net.positions[0]
    x = np.asarray(images, dtype=np.float64) if pos == 0 else forward_to(net, images, pos - 1)
    patches = layer.patches(x).reshape(-1, layer.in_dim)
    k = min(layer.n_out, layer.in_dim)
    basis = batch_pca(patches, k)
    align = cosine_alignment(layer.weights[:k], basis)
    return {
        f"alignment.{layer.name}": [float(v) for v in align.values],
        f"alignment.{layer.name}.min": float(align.values.min()),
        f"alignment.{layer.name}.eigenvalues": [float(v) for v in basis.eigenvalues],
    }


def _emit(rep: Report, args) -> None:
    if args.report:
        rep.write(args.report)
    else:
        sys.stdout.write(rep.to_text())


# -- commands ------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _config(args)
    spec = resolve_spec(args.spec, args.seed)
    data = load_dataset(args)
    net = build_network(spec, data.input_shape, cfg.probe_l2)
    if net.probe.num_classes != data.num_classes:
        raise UsageError(f"spec probe has {net.probe.num_classes} classes, dataset has {data.num_classes}")
    net, tr = train_hebbian(net, data, cfg)
    if args.out:
        save_checkpoint(args.out, net, cfg)
    rep = Report()
    _describe_run(rep, "train", args, data, net)
    if data.name == "synthetic":
        rep.update("", first_layer_alignment(net, data.train_x))
    add_train_report(rep, tr, args.timing)
    _emit(rep, args)
    return 0


def _parse_layers(text: str, net: Network) -> list[int]:
    if text == "all":
        return list(range(1, net.n_hebbian + 1))
    try:
        k = int(text)
    except ValueError:
        raise UsageError(f"--layer must be an integer or 'all', got {text!r}") from None
    if not 0 <= k <= net.n_hebbian:
        raise UsageError(f"--layer {k} outside [0, {net.n_hebbian}]")
    return [k]


def cmd_probe(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    net = ck.network
    layers = _parse_layers(args.layer, net)
    data = load_dataset(args)
    _check_shape(net, data)
    cfg = _config(args)
    rep = Report()
    _describe_run(rep, "probe", args, data, net)
    rep.update("config.", cfg.echo())
    summary, epochs, deviations = [], [], []
    for k in layers:
        _, tr = train_probe_on_layer(net, k, data, cfg, seed=args.seed)
        name = "input" if k == 0 else net.hebbian[k - 1].name
        dim = net.feature_dim(k)
        rep.set(f"layer.{k}.name", name)
        rep.set(f"layer.{k}.chosen_epoch", tr.chosen_epoch)
        rep.set(f"layer.{k}.val_accuracy", tr.val_accuracy)
        rep.set(f"layer.{k}.test_accuracy", tr.test_accuracy)
        if args.timing:
            rep.set(f"layer.{k}.wall_clock_seconds", tr.wall_clock)
        summary.append([k, name, dim, tr.chosen_epoch, tr.val_accuracy, tr.test_accuracy])
        epochs += [[k, e.epoch, e.val_acc, e.test_acc] for e in tr.epochs]
        deviations += [d for d in tr.deviations if d not in deviations]
    rep.set("deviations", " | ".join(deviations))
    rep.table("layers", ["layer", "name", "feat_dim", "chosen_epoch", "val_acc", "test_acc"], summary)
    rep.table("epochs", ["layer", "epoch", "val_acc", "test_acc"], epochs)
    _emit(rep, args)
    return 0


def cmd_retrain(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    net = ck.network
    if not 0 <= args.from_layer < net.n_hebbian:
        raise UsageError(f"--from-layer {args.from_layer} outside [0, {net.n_hebbian})")
    net.spec = dataclasses.replace(net.spec, seed=args.seed)
    data = load_dataset(args)
    _check_shape(net, data)
    cfg = _config(args)
    net, tr = retrain_upper_layers(net, args.from_layer, data, cfg)
    if args.out:
        save_checkpoint(args.out, net, cfg)
    rep = Report()
    _describe_run(rep, "retrain", args, data, net)
    rep.set("from_layer", args.from_layer)
    rep.set("convergence_epoch", convergence_epoch(tr.val_history))
    add_train_report(rep, tr, args.timing)
    _emit(rep, args)
    return 0


def filter_image(weights: np.ndarray) -> np.ndarray:
    """Min-max map one filter's weights onto 0..255 (constant filters -> 128)."""
    lo, hi = float(weights.min()), float(weights.max())
    if hi == lo:
        return np.full(weights.shape, 128, dtype=np.uint8)
    return np.rint((weights - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pnm(path: Path, pixels: np.ndarray) -> None:
    """Binary PGM for ``(H, W)`` pixels, binary PPM for ``(H, W, 3)``."""
    magic = b"P6" if pixels.ndim == 3 else b"P5"
    h, w = pixels.shape[:2]
    path.write_bytes(magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes())


def cmd_inspect(args) -> int:
    net = load_checkpoint(args.checkpoint).network
    if not 1 <= args.layer <= net.n_hebbian:
        raise UsageError(f"--layer {args.layer} outside [1, {net.n_hebbian}]")
    layer = net.hebbian[args.layer - 1]
    if not layer.is_conv:
        raise UsageError(f"layer {args.layer} ({layer.name}) is not convolutional")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    c, (kh, kw) = layer.in_channels, layer.kernel
    as_color = args.layer == 1 and c == 3
    for i, w in enumerate(layer.weights):
        img = filter_image(w.reshape(c, kh, kw))
        if as_color:
            write_pnm(out / f"{layer.name}_filter{i:03d}.ppm", img.transpose(1, 2, 0))
        else:
            # channels side by side, one grayscale tile each
            write_pnm(out / f"{layer.name}_filter{i:03d}.pgm", img.transpose(1, 0, 2).reshape(kh, c * kw))
    print(f"wrote {layer.n_out} filter images to {out}")
    return 0


COMMANDS = {"train": cmd_train, "probe": cmd_probe, "retrain": cmd_retrain, "inspect": cmd_inspect}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, BuildError) as exc:
        parser.print_usage(sys.stderr)
        print(f"hebbpca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DataFormatError, CheckpointError, FileNotFoundError) as exc:
        print(f"hebbpca: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"hebbpca: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
