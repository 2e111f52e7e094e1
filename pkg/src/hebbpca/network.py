"""Declarative Hebbian networks and their training protocol.

A network is an ordered list of stages. Learnable stages are Hebbian
(convolutional or dense) layers, numbered 1..L in order of appearance; a
single linear probe sits at the end. Stateless stages (ReLU, max pooling,
flatten) sit in between. The features "of layer k" are the flattened
activations after layer k and every stateless stage that follows it, i.e.
exactly what layer k+1 (or the probe) receives.

All Hebbian layers learn simultaneously from the same forward pass of each
mini-batch; each layer's update depends only on its own input and weights.
"""

from __future__ import annotations

import dataclasses
import shlex
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conv
from .conv import CenteringStats, HebbianLayer, Rule
from .data import DatasetSplit
from .errors import BuildError, DivergenceError
from .nn_core import Pair, as_pair, conv_output_size, max_pool, pool_output_size, relu, rms_normalize
from .probe import LinearProbe, ProbeHistory, best_epoch, probe_lr, probe_sgd_step, train_probe
from .rules import init_weights

# -- layer descriptors ---------------------------------------------------------


@dataclass(frozen=True)
class ConvHebbianSpec:
    filters: int
    kernel: Pair
    stride: Pair = (1, 1)
    padding: Pair = (0, 0)
    rule: Rule = Rule()

    def to_line(self) -> str:
        return (f"conv_hebbian {self.filters} kernel={_fmt_pair(self.kernel)} "
                f"stride={_fmt_pair(self.stride)} padding={_fmt_pair(self.padding)} rule={self.rule}")


@dataclass(frozen=True)
class DenseHebbianSpec:
    units: int
    rule: Rule = Rule()

    def to_line(self) -> str:
        return f"dense_hebbian {self.units} rule={self.rule}"


@dataclass(frozen=True)
class ReLUSpec:
    def to_line(self) -> str:
        return "relu"


@dataclass(frozen=True)
class MaxPoolSpec:
    window: Pair
    stride: Pair

    def to_line(self) -> str:
        return f"max_pool window={_fmt_pair(self.window)} stride={_fmt_pair(self.stride)}"


@dataclass(frozen=True)
class RMSNormSpec:
    """Per-sample division by the root-mean-square activation."""

    def to_line(self) -> str:
        return "rms_norm"


@dataclass(frozen=True)
class FlattenSpec:
    def to_line(self) -> str:
        return "flatten"


@dataclass(frozen=True)
class ProbeSpec:
    num_classes: int

    def to_line(self) -> str:
        return f"probe {self.num_classes}"


LayerSpec = ConvHebbianSpec | DenseHebbianSpec | ReLUSpec | MaxPoolSpec | RMSNormSpec | FlattenSpec | ProbeSpec
HEBBIAN_SPECS = (ConvHebbianSpec, DenseHebbianSpec)


def _fmt_pair(p: Pair) -> str:
    return str(p[0]) if p[0] == p[1] else f"{p[0]}x{p[1]}"


def _parse_pair(text: str) -> Pair:
    a, _, b = text.partition("x")
    return as_pair((int(a), int(b or a)))


def parse_layer(line: str) -> LayerSpec:
    """Parse one descriptor line, e.g. ``conv_hebbian 32 kernel=5 padding=2``."""
    tokens = shlex.split(line)
    kind, rest = tokens[0], tokens[1:]
    pos = [t for t in rest if "=" not in t]
    kw = dict(t.split("=", 1) for t in rest if "=" in t)
    try:
        if kind == "conv_hebbian":
            return ConvHebbianSpec(
                int(pos[0]), _parse_pair(kw.pop("kernel")),
                _parse_pair(kw.pop("stride", "1")), _parse_pair(kw.pop("padding", "0")),
                Rule.parse(kw.pop("rule", "hpca")),
            )
        if kind == "dense_hebbian":
            return DenseHebbianSpec(int(pos[0]), Rule.parse(kw.pop("rule", "hpca")))
        if kind == "relu":
            return ReLUSpec()
        if kind == "max_pool":
            window = _parse_pair(kw.pop("window"))
            return MaxPoolSpec(window, _parse_pair(kw.pop("stride")) if "stride" in kw else window)
        if kind == "flatten":
            return FlattenSpec()
        if kind == "rms_norm":
            return RMSNormSpec()
        if kind == "probe":
            return ProbeSpec(int(pos[0]))
    except (KeyError, IndexError, ValueError) as exc:
        raise BuildError(f"bad layer descriptor {line!r}: {exc}") from exc
    raise BuildError(f"unknown layer kind {kind!r}")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    seed: int = 0

    def to_text(self) -> str:
        return "\n".join(layer.to_line() for layer in self.layers) + "\n"

    @classmethod
    def from_text(cls, text: str, seed: int = 0) -> "NetworkSpec":
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        return cls(tuple(parse_layer(ln) for ln in lines if ln), seed)

    @classmethod
    def load(cls, path: str | Path, seed: int = 0) -> "NetworkSpec":
        return cls.from_text(Path(path).read_text(), seed)


REFERENCE_SPEC_TEXT = """\
conv_hebbian 32 kernel=5 stride=1 padding=2 rule=hpca-relu
relu
max_pool window=2 stride=2
rms_norm
conv_hebbian 64 kernel=3 stride=1 padding=1 rule=hpca-relu
relu
max_pool window=2 stride=2
rms_norm
conv_hebbian 96 kernel=3 stride=1 padding=1 rule=hpca-relu
relu
rms_norm
conv_hebbian 128 kernel=3 stride=1 padding=1 rule=hpca-relu
relu
max_pool window=2 stride=2
flatten
rms_norm
dense_hebbian 300 rule=hpca-relu
relu
rms_norm
probe 10
"""

REFERENCE_DENSE_SPEC_TEXT = """\
flatten
dense_hebbian 4 rule=hpca-identity
probe 2
"""

NAMED_SPECS = {"reference": REFERENCE_SPEC_TEXT, "reference-dense": REFERENCE_DENSE_SPEC_TEXT}


def reference_spec(seed: int = 0) -> NetworkSpec:
    return NetworkSpec.from_text(REFERENCE_SPEC_TEXT, seed)


def resolve_spec(name_or_path: str, seed: int = 0) -> NetworkSpec:
    if name_or_path in NAMED_SPECS:
        return NetworkSpec.from_text(NAMED_SPECS[name_or_path], seed)
    return NetworkSpec.load(name_or_path, seed)


# -- instantiated network ------------------------------------------------------


def _layer_rng(seed: int, position: int) -> np.random.Generator:
    # one independent stream per stage so re-initializing a stage does not
    # disturb the others
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 1, position])


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 2, epoch])


@dataclass
class Network:
    spec: NetworkSpec
    input_shape: tuple[int, ...]
    shapes: list[tuple[int, ...]]  # output shape of every stage
    hebbian: list[HebbianLayer]  # learnable layers, in order
    probe: LinearProbe
    positions: list[int]  # stage index of each Hebbian layer
    epochs_completed: int = 0
    chosen_epoch: int = -1

    @property
    def n_hebbian(self) -> int:
        return len(self.hebbian)

    def copy(self) -> "Network":
        return dataclasses.replace(self, hebbian=list(self.hebbian), shapes=list(self.shapes),
                                   positions=list(self.positions))

    def tap_stage(self, k: int) -> int:
        """Last stage index belonging to Hebbian layer ``k`` (1-based; 0 = input)."""
        if not 0 <= k <= self.n_hebbian:
            raise IndexError(f"layer index {k} outside [0, {self.n_hebbian}]")
        nxt = self.positions[k] if k < self.n_hebbian else len(self.spec.layers) - 1
        return nxt - 1

    def feature_dim(self, k: int) -> int:
        stage = self.tap_stage(k)
        shape = self.input_shape if stage < 0 else self.shapes[stage]
        return int(np.prod(shape))


def _stage_output_shape(spec: LayerSpec, in_shape: tuple[int, ...], pos: int) -> tuple[int, ...]:
    if isinstance(spec, ConvHebbianSpec):
        if len(in_shape) != 3:
            raise BuildError(f"stage {pos} ({spec.to_line()}): needs (C, H, W) input, got {in_shape}")
        oh, ow = conv_output_size(in_shape[1:], spec.kernel, spec.stride, spec.padding)
        return (spec.filters, oh, ow)
    if isinstance(spec, DenseHebbianSpec):
        if len(in_shape) != 1:
            raise BuildError(f"stage {pos} ({spec.to_line()}): needs flat input, got {in_shape}; add flatten")
        return (spec.units,)
    if isinstance(spec, (ReLUSpec, RMSNormSpec)):
        return in_shape
    if isinstance(spec, MaxPoolSpec):
        if len(in_shape) != 3:
            raise BuildError(f"stage {pos} ({spec.to_line()}): needs (C, H, W) input, got {in_shape}")
        return (in_shape[0], *pool_output_size(in_shape[1:], spec.window, spec.stride))
    if isinstance(spec, FlattenSpec):
        return (int(np.prod(in_shape)),)
    if isinstance(spec, ProbeSpec):
        if len(in_shape) != 1:
            raise BuildError(f"stage {pos} (probe): needs flat input, got {in_shape}; add flatten")
        return (spec.num_classes,)
    raise BuildError(f"unknown stage {spec!r}")


def init_hebbian_layer(spec: NetworkSpec, pos: int, in_shape: tuple[int, ...], ordinal: int) -> HebbianLayer:
    s = spec.layers[pos]
    rng = _layer_rng(spec.seed, pos)
    if isinstance(s, ConvHebbianSpec):
        d = in_shape[0] * s.kernel[0] * s.kernel[1]
        return HebbianLayer(init_weights(s.filters, d, rng), s.rule, s.kernel, s.stride, s.padding,
                            in_shape[0], name=f"conv{ordinal}")
    d = in_shape[0]
    return HebbianLayer(init_weights(s.units, d, rng), s.rule, name=f"dense{ordinal}")


def init_probe(spec: NetworkSpec, feat_dim: int, l2: float = 5e-4) -> LinearProbe:
    pos = len(spec.layers) - 1
    return LinearProbe.init(spec.layers[pos].num_classes, feat_dim, _layer_rng(spec.seed, pos), l2)


def build_network(spec: NetworkSpec, input_shape: tuple[int, ...], probe_l2: float = 5e-4) -> Network:
    """Validate shapes stage by stage and initialize weights from ``spec.seed``."""
    layers = spec.layers
    probes = [i for i, s in enumerate(layers) if isinstance(s, ProbeSpec)]
    if probes != [len(layers) - 1]:
        raise BuildError("a network needs exactly one probe, as its last stage")
    shape = tuple(int(v) for v in input_shape)
    input_shape = shape
    shapes, hebbian, positions = [], [], []
    for pos, s in enumerate(layers):
        try:
            out = _stage_output_shape(s, shape, pos)
        except BuildError:
            raise
        except ValueError as exc:  # DimensionError from the shape helpers
            raise BuildError(f"stage {pos} ({s.to_line()}): {exc}") from exc
        if isinstance(s, HEBBIAN_SPECS):
            hebbian.append(init_hebbian_layer(spec, pos, shape, len(hebbian) + 1))
            positions.append(pos)
        shapes.append(out)
        if not isinstance(s, ProbeSpec):
            shape = out
    probe = init_probe(spec, int(np.prod(shape)), probe_l2)
    return Network(spec, input_shape, shapes, hebbian, probe, positions)


def _apply_stateless(s: LayerSpec, x: np.ndarray) -> np.ndarray:
    if isinstance(s, ReLUSpec):
        return relu(x)
    if isinstance(s, MaxPoolSpec):
        return max_pool(x, s.window, s.stride)
    if isinstance(s, RMSNormSpec):
        return rms_normalize(x)
    if isinstance(s, FlattenSpec):
        return x.reshape(x.shape[0], -1)
    raise TypeError(f"not a stateless stage: {s!r}")


def forward_to(net: Network, batch: np.ndarray, stop_stage: int, start_stage: int = 0,
               on_hebbian=None) -> np.ndarray:
    """Run stages ``start_stage..stop_stage`` (inclusive) on a batch.

    ``on_hebbian(k, x)`` is called with the 0-based Hebbian index and that
    layer's input before the layer runs.
    """
    x = np.asarray(batch, dtype=np.float64)
    pos_to_k = {p: k for k, p in enumerate(net.positions)}
    for pos in range(start_stage, stop_stage + 1):
        s = net.spec.layers[pos]
        if pos in pos_to_k:
            k = pos_to_k[pos]
            if on_hebbian is not None:
                on_hebbian(k, x)
            x = conv.layer_forward_batch(net.hebbian[k], x)
        else:
            x = _apply_stateless(s, x)
    return x


def _batches(n: int, batch_size: int, order: np.ndarray | None = None):
    idx = np.arange(n) if order is None else order
    for s in range(0, n, batch_size):
        yield idx[s : s + batch_size]


def extract_features(net: Network, images: np.ndarray, layer_index: int, batch_size: int = 256) -> np.ndarray:
    """Flattened features of Hebbian layer ``layer_index`` (1-based; 0 = raw input)."""
    stage = net.tap_stage(layer_index)
    out = np.empty((len(images), net.feature_dim(layer_index)))
    for idx in _batches(len(images), batch_size):
        f = forward_to(net, images[idx], stage) if stage >= 0 else np.asarray(images[idx], dtype=np.float64)
        out[idx] = f.reshape(len(idx), -1)
    return out


# -- training --------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    eta_hebbian: float = 1e-3
    eta_probe: float = 1e-3
    probe_l2: float = 5e-4
    early_stopping: bool = True
    greedy: bool = False  # train Hebbian layers one after another instead of together

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.eta_hebbian <= 0 or self.eta_probe <= 0 or self.probe_l2 < 0:
            raise ValueError("learning rates must be positive and l2 non-negative")

    def echo(self) -> dict[str, object]:
        return dataclasses.asdict(self)


DEFAULT_CONFIG = TrainConfig()

# Departures from the published protocol that hold for every run.
STANDING_DEVIATIONS = (
    "probe optimizer is plain SGD + L2; no momentum, Nesterov or dropout",
    "architecture is the documented reference stand-in, not the original network",
)
STANDARDIZED_INPUT_DEVIATION = "inputs standardized per channel with train-split statistics"
RMS_NORM_DEVIATION = "rms_norm stages (not in the published pipeline) rescale inputs of deeper layers"
PROBE_SCALING_DEVIATION = "post-hoc probes see features standardized with train-split statistics"


def spec_deviations(spec: NetworkSpec) -> list[str]:
    return [RMS_NORM_DEVIATION] if any(isinstance(s, RMSNormSpec) for s in spec.layers) else []


def config_deviations(cfg: TrainConfig) -> list[str]:
    out = []
    for key, value in cfg.echo().items():
        default = getattr(DEFAULT_CONFIG, key)
        if value != default:
            out.append(f"{key}={value} (protocol default {default})")
    return out


def run_deviations(spec: NetworkSpec, cfg: TrainConfig, data: DatasetSplit | None = None) -> list[str]:
    out = list(STANDING_DEVIATIONS)
    if data is not None and data.name == "cifar10":
        out.append(STANDARDIZED_INPUT_DEVIATION)
    return out + spec_deviations(spec) + config_deviations(cfg)


@dataclass
class EpochRecord:
    epoch: int
    rep_error: list[float]  # per trainable Hebbian layer, None for frozen ones
    val_acc: float
    test_acc: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    layer_names: list[str] = field(default_factory=list)
    chosen_epoch: int = -1
    test_accuracy: float = float("nan")
    val_accuracy: float = float("nan")
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)
    deviations: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def val_history(self) -> list[float]:
        return [e.val_acc for e in self.epochs]

    @property
    def test_history(self) -> list[float]:
        return [e.test_acc for e in self.epochs]


def _split_for_training(net: Network, data: DatasetSplit, frozen: int, batch_size: int):
    """Images as seen by the first trainable stage.

    Frozen layers never change, so their output is computed once up front.
    """
    if frozen == 0:
        return 0, data.train_x, data.val_x, data.test_x
    stage = net.tap_stage(frozen)
    f = lambda x: _forward_cached(net, x, stage, batch_size)  # noqa: E731
    return stage + 1, f(data.train_x), f(data.val_x), f(data.test_x)


def _forward_cached(net: Network, images: np.ndarray, stage: int, batch_size: int) -> np.ndarray:
    parts = [forward_to(net, images[idx], stage) for idx in _batches(len(images), batch_size)]
    return np.concatenate(parts) if parts else np.empty((0,) + net.shapes[stage])


def _probe_accuracy(net: Network, x: np.ndarray, y: np.ndarray, start: int, batch_size: int = 256) -> float:
    if len(y) == 0:
        return 0.0
    last = len(net.spec.layers) - 2
    hits = 0
    for idx in _batches(len(y), batch_size):
        feats = forward_to(net, x[idx], last, start).reshape(len(idx), -1)
        hits += int(np.sum(np.argmax(feats @ net.probe.weights.T + net.probe.bias, axis=1) == y[idx]))
    return hits / len(y)


def _centering_prepass(net: Network, x: np.ndarray, start: int, trainable: list[int], batch_size: int) -> None:
    """Exact patch means of every trainable layer's input under the initial weights."""
    stats = {k: CenteringStats.empty(net.hebbian[k].in_dim) for k in trainable}

    def collect(k, inp):
        if k in stats:
            stats[k] = conv.update_centering(stats[k], net.hebbian[k].patches(inp))

    stop = net.positions[trainable[-1]]
    for idx in _batches(len(x), batch_size):
        forward_to(net, x[idx], stop, start, on_hebbian=collect)
    for k in trainable:
        net.hebbian[k] = dataclasses.replace(net.hebbian[k], centering=stats[k])


def _train_layers(net: Network, data: DatasetSplit, cfg: TrainConfig, frozen: int,
                  report: TrainReport) -> Network:
    trainable = list(range(frozen, net.n_hebbian))
    start, tx, vx, sx = _split_for_training(net, data, frozen, cfg.batch_size)
    ty = data.train_y
    last = len(net.spec.layers) - 1
    best_state = None

    _centering_prepass(net, tx, start, trainable, cfg.batch_size)

    for epoch in range(cfg.epochs):
        order = _epoch_rng(net.spec.seed, epoch).permutation(len(ty))
        running = {k: net.hebbian[k].centering for k in trainable}
        err_sum = {k: 0.0 for k in trainable}
        n_batches = 0
        lr_probe = probe_lr(cfg.eta_probe, epoch, cfg.epochs)
        if cfg.greedy:
            # one layer per stretch of the epoch budget, lowest first
            span = max(1, cfg.epochs // len(trainable))
            active = {trainable[min(epoch // span, len(trainable) - 1)]}
        else:
            active = set(trainable)
        for b, idx in enumerate(_batches(len(ty), cfg.batch_size, order)):
            deltas = {}

            def learn(k, inp):
                if k not in running:
                    return
                layer = net.hebbian[k]
                running[k] = conv.update_centering(running[k], layer.patches(inp))
                err_sum[k] += conv.layer_objective(layer, inp)
                if k in active:
                    deltas[k] = conv.conv_hebbian_step(layer, inp, cfg.eta_hebbian)

            feats = forward_to(net, tx[idx], last - 1, start, on_hebbian=learn)
            feats = feats.reshape(len(idx), -1)
            try:
                for k, d in deltas.items():
                    net.hebbian[k] = conv.apply_update(net.hebbian[k], d)
            except DivergenceError as exc:
                raise DivergenceError(f"{exc} (epoch {epoch + 1}, batch {b})") from exc
            net.probe = probe_sgd_step(net.probe, feats, ty[idx], lr_probe)
            if not np.all(np.isfinite(net.probe.weights)):
                raise DivergenceError(f"probe diverged (epoch {epoch + 1}, batch {b})")
            n_batches += 1
        for k in trainable:
            net.hebbian[k] = dataclasses.replace(net.hebbian[k], centering=running[k])
        val = _probe_accuracy(net, vx, data.val_y, start)
        test = _probe_accuracy(net, sx, data.test_y, start)
        errs = [err_sum[k] / n_batches if k in err_sum else None for k in range(net.n_hebbian)]
        report.epochs.append(EpochRecord(epoch + 1, errs, val, test))
        net.epochs_completed += 1
        if not cfg.early_stopping or best_epoch(report.val_history) == epoch:
            best_state = (list(net.hebbian), net.probe)
    chosen = best_epoch(report.val_history) if cfg.early_stopping else cfg.epochs - 1
    net.hebbian, net.probe = best_state
    net.chosen_epoch = chosen + 1
    report.chosen_epoch = chosen + 1
    report.val_accuracy = report.epochs[chosen].val_acc
    report.test_accuracy = report.epochs[chosen].test_acc
    return net


def _run(net: Network, data: DatasetSplit, cfg: TrainConfig, frozen: int) -> tuple[Network, TrainReport]:
    if net.n_hebbian == 0:
        raise ValueError("network has no Hebbian layer to train")
    if len(data.train_y) == 0:
        raise ValueError("empty training split")
    if tuple(data.input_shape) != tuple(net.input_shape):
        raise BuildError(f"data shape {data.input_shape} != network input {net.input_shape}")
    t0 = time.perf_counter()
    net = net.copy()
    net.epochs_completed = 0
    report = TrainReport(layer_names=[h.name for h in net.hebbian], config=cfg.echo(),
                         deviations=run_deviations(net.spec, cfg, data))
    _train_layers(net, data, cfg, frozen, report)
    report.wall_clock = time.perf_counter() - t0
    return net, report


def train_hebbian(net: Network, data: DatasetSplit, cfg: TrainConfig = DEFAULT_CONFIG) -> tuple[Network, TrainReport]:
    """Train every Hebbian layer plus the terminal probe; returns a new network."""
    return _run(net, data, cfg, frozen=0)


def retrain_upper_layers(net: Network, from_layer: int, data: DatasetSplit,
                         cfg: TrainConfig = DEFAULT_CONFIG) -> tuple[Network, TrainReport]:
    """Keep the first ``from_layer`` Hebbian layers frozen; re-initialize and
    train the rest together with a fresh probe."""
    if not 0 <= from_layer < net.n_hebbian:
        raise IndexError(f"from_layer {from_layer} outside [0, {net.n_hebbian})")
    fresh = net.copy()
    for k in range(from_layer, net.n_hebbian):
        pos = net.positions[k]
        in_shape = net.input_shape if pos == 0 else net.shapes[pos - 1]
        fresh.hebbian[k] = init_hebbian_layer(net.spec, pos, in_shape, k + 1)
    fresh.probe = init_probe(net.spec, net.probe.feat_dim, cfg.probe_l2)
    return _run(fresh, data, cfg, frozen=from_layer)


def feature_scaling(train_features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std (constant features get std 1)."""
    mean = train_features.mean(axis=0)
    std = train_features.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def fold_scaling(p: LinearProbe, mean: np.ndarray, std: np.ndarray) -> LinearProbe:
    """Probe on raw features equivalent to ``p`` applied to ``(f - mean) / std``."""
    w = p.weights / std[None, :]
    return dataclasses.replace(p, weights=w, bias=p.bias - w @ mean)


def train_probe_on_layer(net: Network, layer_index: int, data: DatasetSplit,
                         cfg: TrainConfig = DEFAULT_CONFIG,
                         seed: int | None = None) -> tuple[LinearProbe, TrainReport]:
    """Fit a fresh linear probe on frozen features of one Hebbian layer.

    Features are standardized with training-split statistics while the probe
    learns; the returned probe has that map folded in and takes raw features.
    ``seed`` (default: the network seed) drives the probe's initialization
    and shuffling.
    """
    t0 = time.perf_counter()
    seed = net.spec.seed if seed is None else seed
    feats = {s: extract_features(net, data.split(s)[0], layer_index) for s in ("train", "val", "test")}
    mean, std = feature_scaling(feats["train"])
    feats = {s: (f - mean) / std for s, f in feats.items()}
    rng = _layer_rng(seed, 10_000 + layer_index)
    probe = LinearProbe.init(data.num_classes, feats["train"].shape[1], rng, cfg.probe_l2)
    probe, hist = train_probe(
        probe, (feats["train"], data.train_y), (feats["val"], data.val_y), (feats["test"], data.test_y),
        epochs=cfg.epochs, batch_size=cfg.batch_size, eta=cfg.eta_probe,
        seed=seed, early_stopping=cfg.early_stopping,
    )
    report = _probe_report(hist, cfg, layer_index, net.spec, data)
    report.deviations += [PROBE_SCALING_DEVIATION]
    report.wall_clock = time.perf_counter() - t0
    return fold_scaling(probe, mean, std), report


def _probe_report(hist: ProbeHistory, cfg: TrainConfig, layer_index: int,
                  spec: NetworkSpec, data: DatasetSplit) -> TrainReport:
    report = TrainReport(config=cfg.echo(), deviations=run_deviations(spec, cfg, data))
    for e, (v, t) in enumerate(zip(hist.val_acc, hist.test_acc)):
        report.epochs.append(EpochRecord(e + 1, [], v, t))
    report.chosen_epoch = hist.best_epoch + 1
    report.val_accuracy = hist.best_val
    report.test_accuracy = hist.test_at_best
    report.extra["layer"] = layer_index
    return report
