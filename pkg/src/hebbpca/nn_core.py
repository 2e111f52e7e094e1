"""Forward-pass primitives: patch extraction, convolution as a matrix
product, max pooling, ReLU and per-sample RMS normalization.

Tensors are plain float64 numpy arrays. Single-image functions take
``(C, H, W)`` arrays; the ``*_batch`` variants take ``(B, C, H, W)`` and are
what the training loops use. No function mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

Pair = tuple[int, int]


def as_pair(v: int | tuple[int, int] | list[int]) -> Pair:
    if isinstance(v, (int, np.integer)):
        return int(v), int(v)
    a, b = v
    return int(a), int(b)


def conv_output_size(size: Pair, kernel: Pair, stride: Pair, padding: Pair) -> Pair:
    """Spatial output size of a convolution; raises if the kernel does not fit."""
    (h, w), (kh, kw), (sh, sw), (ph, pw) = size, kernel, stride, padding
    if sh < 1 or sw < 1:
        raise DimensionError(f"stride must be >= 1, got {(sh, sw)}")
    if kh < 1 or kw < 1:
        raise DimensionError(f"kernel must be >= 1, got {(kh, kw)}")
    if ph < 0 or pw < 0:
        raise DimensionError(f"padding must be >= 0, got {(ph, pw)}")
    if h + 2 * ph < kh or w + 2 * pw < kw:
        raise DimensionError(
            f"kernel {(kh, kw)} does not fit input {(h, w)} with padding {(ph, pw)}"
        )
    return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1


@dataclass(frozen=True)
class PatchMatrix:
    """Receptive fields of one image laid out as matrix rows.

    Row ``p`` holds the zero-padded window at spatial position ``p``
    (row-major over the output grid), flattened channel-major and then
    row-major within the kernel window.
    """

    data: np.ndarray  # (P, C*kh*kw)
    input_shape: tuple[int, int, int]
    kernel: Pair
    stride: Pair
    padding: Pair
    out_height: int
    out_width: int

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def extract_patches_batch(
    batch: np.ndarray,
    kernel: Pair,
    stride: Pair = (1, 1),
    padding: Pair = (0, 0),
) -> np.ndarray:
    """im2col over a batch: ``(B, C, H, W)`` -> ``(B, P, C*kh*kw)``."""
    if batch.ndim != 4:
        raise DimensionError(f"expected (B, C, H, W) input, got shape {batch.shape}")
    kernel, stride, padding = as_pair(kernel), as_pair(stride), as_pair(padding)
    b, c, h, w = batch.shape
    oh, ow = conv_output_size((h, w), kernel, stride, padding)
    (kh, kw), (sh, sw), (ph, pw) = kernel, stride, padding
    x = np.asarray(batch, dtype=np.float64)
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (B, C, H', W', kh, kw)
    win = win[:, :, : (oh - 1) * sh + 1 : sh, : (ow - 1) * sw + 1 : sw]
    win = win.transpose(0, 2, 3, 1, 4, 5)  # (B, oh, ow, C, kh, kw)
    return np.ascontiguousarray(win).reshape(b, oh * ow, c * kh * kw)


def extract_patches(
    image: np.ndarray,
    kernel: Pair,
    stride: Pair = (1, 1),
    padding: Pair = (0, 0),
) -> PatchMatrix:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise DimensionError(f"expected (C, H, W) input, got shape {image.shape}")
    kernel, stride, padding = as_pair(kernel), as_pair(stride), as_pair(padding)
    oh, ow = conv_output_size(image.shape[1:], kernel, stride, padding)
    data = extract_patches_batch(image[None], kernel, stride, padding)[0]
    return PatchMatrix(data, tuple(image.shape), kernel, stride, padding, oh, ow)


def conv_forward(patches: PatchMatrix, weights: np.ndarray) -> np.ndarray:
    """Shared-weight convolution: ``out[f, p] = weights[f] . patches[p]``."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != patches.cols:
        raise DimensionError(
            f"weights {weights.shape} incompatible with {patches.cols}-wide patches"
        )
    out = patches.data @ weights.T  # (P, F)
    return np.ascontiguousarray(out.T).reshape(
        weights.shape[0], patches.out_height, patches.out_width
    )


def conv_forward_batch(
    batch: np.ndarray,
    weights: np.ndarray,
    kernel: Pair,
    stride: Pair = (1, 1),
    padding: Pair = (0, 0),
) -> np.ndarray:
    """Batched convolution ``(B, C, H, W)`` -> ``(B, F, oh, ow)``."""
    kernel, stride, padding = as_pair(kernel), as_pair(stride), as_pair(padding)
    oh, ow = conv_output_size(batch.shape[2:], kernel, stride, padding)
    cols = extract_patches_batch(batch, kernel, stride, padding)
    if weights.shape[1] != cols.shape[2]:
        raise DimensionError(
            f"weights {weights.shape} incompatible with {cols.shape[2]}-wide patches"
        )
    out = cols @ weights.T  # (B, P, F)
    return np.ascontiguousarray(out.transpose(0, 2, 1)).reshape(
        batch.shape[0], weights.shape[0], oh, ow
    )


def pool_output_size(size: Pair, window: Pair, stride: Pair) -> Pair:
    """Output size when overhanging windows are clipped rather than dropped.

    A trailing window is kept as long as it starts inside the input.
    """
    out = []
    for n, k, s in zip(size, window, stride):
        if s < 1 or k < 1:
            raise DimensionError(f"pool window/stride must be >= 1, got {window}/{stride}")
        if k > n:
            raise DimensionError(f"pool window {window} larger than input {size}")
        o = -(-(n - k) // s) + 1
        if (o - 1) * s >= n:
            o -= 1
        out.append(o)
    return out[0], out[1]


def max_pool(x: np.ndarray, window: Pair, stride: Pair | None = None) -> np.ndarray:
    """Max pooling over the last two axes of a ``(..., H, W)`` array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise DimensionError(f"max_pool needs at least 2 dims, got {x.shape}")
    window = as_pair(window)
    stride = window if stride is None else as_pair(stride)
    h, w = x.shape[-2:]
    oh, ow = pool_output_size((h, w), window, stride)
    (wh, ww), (sh, sw) = window, stride
    need_h = (oh - 1) * sh + wh
    need_w = (ow - 1) * sw + ww
    if need_h > h or need_w > w:
        pad = [(0, 0)] * (x.ndim - 2) + [(0, max(0, need_h - h)), (0, max(0, need_w - w))]
        x = np.pad(x, pad, constant_values=-np.inf)
    win = sliding_window_view(x, (wh, ww), axis=(-2, -1))
    win = win[..., : (oh - 1) * sh + 1 : sh, : (ow - 1) * sw + 1 : sw, :, :]
    return win.max(axis=(-2, -1))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def rms_normalize(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Divide every sample (leading axis) by its root-mean-square value."""
    x = np.asarray(x, dtype=np.float64)
    axes = tuple(range(1, x.ndim))
    rms = np.sqrt(np.mean(x * x, axis=axes, keepdims=True) + eps)
    return x / rms
