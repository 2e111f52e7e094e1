"""Hebbian layers with shared kernels.

Every spatial position of every image in a mini-batch contributes one
centered patch; the dense rule's update is computed per patch and the
updates are averaged into a single kernel update. A dense (fully connected)
Hebbian layer is the special case with one "patch" per image: the whole
flattened input.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import rules
from .errors import DimensionError, DivergenceError
from .nn_core import (
    Pair,
    PatchMatrix,
    as_pair,
    conv_forward,
    conv_output_size,
    extract_patches,
    extract_patches_batch,
)
from .rules import Nonlinearity


@dataclass(frozen=True)
class Rule:
    kind: str = "hpca"  # "hpca" or "wta"
    f: Nonlinearity = Nonlinearity.RELU

    def __post_init__(self):
        if self.kind not in ("hpca", "wta"):
            raise ValueError(f"unknown rule {self.kind!r}")
        object.__setattr__(self, "f", Nonlinearity(self.f))

    @classmethod
    def parse(cls, text: str) -> "Rule":
        """``hpca`` (ReLU), ``hpca-relu``, ``hpca-identity`` or ``wta``."""
        name, _, f = text.partition("-")
        if name == "wta":
            if f:
                raise ValueError(f"wta takes no nonlinearity: {text!r}")
            return cls("wta")
        return cls(name, Nonlinearity(f or "relu"))

    def __str__(self) -> str:
        return "wta" if self.kind == "wta" else f"hpca-{self.f.value}"


@dataclass(frozen=True)
class CenteringStats:
    mean: np.ndarray
    count: int = 0

    @classmethod
    def empty(cls, dim: int) -> "CenteringStats":
        return cls(np.zeros(dim), 0)


def update_centering(stats: CenteringStats, patches: PatchMatrix | np.ndarray) -> CenteringStats:
    """Fold a batch of patches into the exact running mean."""
    x = patches.data if isinstance(patches, PatchMatrix) else np.asarray(patches, dtype=np.float64)
    x = x.reshape(-1, x.shape[-1])
    if x.shape[1] != stats.mean.shape[0]:
        raise DimensionError(f"patch width {x.shape[1]} != stats dim {stats.mean.shape[0]}")
    n = x.shape[0]
    if n == 0:
        return stats
    total = stats.count + n
    mean = stats.mean + (x.sum(axis=0) - n * stats.mean) / total
    return CenteringStats(mean, total)


@dataclass(frozen=True)
class HebbianLayer:
    """Learnable Hebbian layer.

    ``kernel is None`` marks a dense layer over flattened inputs of width
    ``in_dim``; otherwise the layer convolves ``in_channels`` feature maps.
    ``centering`` is the patch mean subtracted from the rule's inputs.
    """

    weights: np.ndarray
    rule: Rule = Rule()
    kernel: Pair | None = None
    stride: Pair = (1, 1)
    padding: Pair = (0, 0)
    in_channels: int = 1
    centering: CenteringStats = field(default=None)
    name: str = "hebbian"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError(f"weights must be (F, D), got {w.shape}")
        object.__setattr__(self, "weights", w)
        if self.kernel is not None:
            kh, kw = as_pair(self.kernel)
            object.__setattr__(self, "kernel", (kh, kw))
            object.__setattr__(self, "stride", as_pair(self.stride))
            object.__setattr__(self, "padding", as_pair(self.padding))
            if w.shape[1] != self.in_channels * kh * kw:
                raise DimensionError(
                    f"{self.name}: weight width {w.shape[1]} != "
                    f"{self.in_channels}*{kh}*{kw}"
                )
        if self.centering is None:
            object.__setattr__(self, "centering", CenteringStats.empty(w.shape[1]))
        elif self.centering.mean.shape != (w.shape[1],):
            raise DimensionError(f"{self.name}: centering dim mismatch")

    @property
    def is_conv(self) -> bool:
        return self.kernel is not None

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        if not self.is_conv:
            if in_shape != (self.in_dim,):
                raise DimensionError(f"{self.name}: expects ({self.in_dim},), got {in_shape}")
            return (self.n_out,)
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise DimensionError(
                f"{self.name}: expects ({self.in_channels}, H, W), got {in_shape}"
            )
        oh, ow = conv_output_size(in_shape[1:], self.kernel, self.stride, self.padding)
        return (self.n_out, oh, ow)

    def patches(self, batch: np.ndarray) -> np.ndarray:
        """Raw (uncentered) rule inputs, ``(B, P, D)``."""
        batch = np.asarray(batch, dtype=np.float64)
        if not self.is_conv:
            if batch.ndim != 2 or batch.shape[1] != self.in_dim:
                raise DimensionError(f"{self.name}: expects (B, {self.in_dim}), got {batch.shape}")
            return batch[:, None, :]
        if batch.ndim != 4 or batch.shape[1] != self.in_channels:
            raise DimensionError(
                f"{self.name}: expects (B, {self.in_channels}, H, W), got {batch.shape}"
            )
        return extract_patches_batch(batch, self.kernel, self.stride, self.padding)


ConvHebbianLayer = HebbianLayer


def centered_inputs(layer: HebbianLayer, batch: np.ndarray) -> np.ndarray:
    """Centered patches of a batch as an ``(B*P, D)`` matrix."""
    x = layer.patches(batch)
    return x.reshape(-1, x.shape[-1]) - layer.centering.mean


def conv_hebbian_step(layer: HebbianLayer, input_batch: np.ndarray, eta: float) -> np.ndarray:
    """Mean of the layer rule's per-patch updates over a mini-batch."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    x = centered_inputs(layer, input_batch)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{layer.name}: non-finite input")
    if x.shape[0] == 1:
        # a single patch: use the literal per-sample formulas
        if layer.rule.kind == "wta":
            return rules.wta_update(layer.weights, x[0], eta)
        return rules.hpca_update(layer.weights, x, layer.rule.f, eta)
    if layer.rule.kind == "wta":
        return rules.wta_batch_delta(layer.weights, x, eta)
    return rules.hpca_batch_delta(layer.weights, x, layer.rule.f, eta)


def layer_objective(layer: HebbianLayer, input_batch: np.ndarray) -> float:
    """Mean representation error (HPCA) or quantization error (WTA) per patch."""
    x = centered_inputs(layer, input_batch)
    w = layer.weights
    if layer.rule.kind == "wta":
        d2 = (x * x).sum(axis=1)[:, None] + (w * w).sum(axis=1)[None, :] - 2.0 * (x @ w.T)
        return float(np.mean(np.maximum(d2.min(axis=1), 0.0)))
    return rules.representation_error(w, x, layer.rule.f)


def apply_update(layer: HebbianLayer, delta: np.ndarray) -> HebbianLayer:
    if delta.shape != layer.weights.shape:
        raise DimensionError(f"{layer.name}: delta {delta.shape} vs weights {layer.weights.shape}")
    w = layer.weights + delta
    if not np.all(np.isfinite(w)):
        raise DivergenceError(f"layer {layer.name!r} produced non-finite weights")
    return dataclasses.replace(layer, weights=w)


def layer_forward_batch(layer: HebbianLayer, batch: np.ndarray) -> np.ndarray:
    """Uncentered linear response: ``(B, F, oh, ow)`` for conv, ``(B, F)`` for dense."""
    x = layer.patches(batch)  # (B, P, D)
    out = x @ layer.weights.T  # (B, P, F)
    if not layer.is_conv:
        return out[:, 0, :]
    b = batch.shape[0]
    _, oh, ow = layer.output_shape(tuple(batch.shape[1:]))
    return np.ascontiguousarray(out.transpose(0, 2, 1)).reshape(b, layer.n_out, oh, ow)


def layer_forward(layer: HebbianLayer, image: np.ndarray) -> np.ndarray:
    """Single-input forward pass; a pure convolution for conv layers."""
    image = np.asarray(image, dtype=np.float64)
    if not layer.is_conv:
        return layer_forward_batch(layer, image[None])[0]
    layer.output_shape(tuple(image.shape))
    return conv_forward(extract_patches(image, layer.kernel, layer.stride, layer.padding), layer.weights)
