"""Hebbian learning rules over a dense view of a layer.

A layer is an ``(N, D)`` weight matrix whose row order matters: row ``i`` is
neuron ``i`` and, for the PCA rules, the ``i``-th extracted component. Every
rule returns the weight *change* and leaves ``w`` untouched.

The single-sample functions follow the textbook formulas literally and are
the reference behaviour. ``hpca_batch_delta`` and ``wta_batch_delta`` compute
the same batch-mean updates as dense matrix products; the convolutional
layers use them on hundreds of thousands of patches per step.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import DimensionError


class Nonlinearity(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"

    def __call__(self, y: np.ndarray) -> np.ndarray:
        if self is Nonlinearity.IDENTITY:
            return y
        return np.maximum(y, 0.0)


def _check(w: np.ndarray, x: np.ndarray) -> None:
    if w.ndim != 2:
        raise DimensionError(f"weights must be (N, D), got {w.shape}")
    if x.shape[-1] != w.shape[1]:
        raise DimensionError(f"input dim {x.shape[-1]} != weight dim {w.shape[1]}")


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")


def init_weights(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform in ``[-1/sqrt(d), 1/sqrt(d)]``."""
    a = 1.0 / np.sqrt(d)
    return rng.uniform(-a, a, size=(n, d))


def hebb_plain(w: np.ndarray, x: np.ndarray, eta: float) -> np.ndarray:
    """``delta_i = eta * y_i * x`` with ``y = w x``."""
    _check(w, x)
    y = w @ x
    return eta * y[:, None] * x[None, :]


def hebb_decay(w: np.ndarray, x: np.ndarray, eta: float) -> np.ndarray:
    """Hebb with weight decay: ``delta_i = eta * y_i * (x - w_i)``."""
    _check(w, x)
    y = w @ x
    return eta * y[:, None] * (x[None, :] - w)


def wta_select(w: np.ndarray, x: np.ndarray) -> int:
    """Index of the neuron whose weight vector is closest to ``x``.

    Ties go to the lowest index.
    """
    _check(w, x)
    return int(np.argmin(np.linalg.norm(x[None, :] - w, axis=1)))


def wta_update(w: np.ndarray, x: np.ndarray, eta: float) -> np.ndarray:
    """Move only the winner towards the input: ``eta * (x - w_win)``."""
    k = wta_select(w, x)
    delta = np.zeros_like(w, dtype=np.float64)
    delta[k] = eta * (x - w[k])
    return delta


def sanger_update(w: np.ndarray, x: np.ndarray, eta: float) -> np.ndarray:
    """Linear generalized Hebbian algorithm for one sample.

    ``delta_i = eta * y_i * (x - sum_{j<=i} y_j w_j)``
    """
    _check(w, x)
    n = w.shape[0]
    y = w @ x
    delta = np.empty_like(w, dtype=np.float64)
    recon = np.zeros(w.shape[1])
    for i in range(n):
        recon = recon + y[i] * w[i]
        delta[i] = eta * y[i] * (x - recon)
    return delta


def _hpca_single(w: np.ndarray, x: np.ndarray, f: Nonlinearity, eta: float) -> np.ndarray:
    fy = f(w @ x)
    recon = np.cumsum(fy[:, None] * w, axis=0)
    return eta * fy[:, None] * (x[None, :] - recon)


def hpca_update(
    w: np.ndarray,
    x_batch: np.ndarray,
    f: Nonlinearity | str,
    eta: float,
) -> np.ndarray:
    """Nonlinear Hebbian PCA update averaged over a batch of centered inputs.

    Per sample, ``delta_i = eta * f(y_i) * (x - sum_{j<=i} f(y_j) w_j)``; the
    per-sample deltas are summed in batch order and divided by ``B``. All
    neurons use the pre-update weights.
    """
    f = Nonlinearity(f)
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    _check(w, x_batch)
    _check_finite(x_batch)
    total = np.zeros(w.shape, dtype=np.float64)
    for x in x_batch:
        total = total + _hpca_single(w, x, f, eta)
    return total / x_batch.shape[0]


def hpca_batch_delta(
    w: np.ndarray,
    x: np.ndarray,
    f: Nonlinearity | str,
    eta: float,
) -> np.ndarray:
    """Batch-mean HPCA update written as matrix products.

    With ``F = f(X W^T)`` the mean update is
    ``eta/M * (F^T X - tril(F^T F) W)``, identical in exact arithmetic to
    averaging the per-sample rule over the ``M`` rows of ``x``.
    """
    f = Nonlinearity(f)
    _check(w, x)
    fy = f(x @ w.T)  # (M, N)
    gram = np.tril(fy.T @ fy)
    return (eta / x.shape[0]) * (fy.T @ x - gram @ w)


def wta_batch_delta(w: np.ndarray, x: np.ndarray, eta: float) -> np.ndarray:
    """Batch-mean winner-takes-all update over the rows of ``x``."""
    _check(w, x)
    # squared distances up to the per-row constant |x|^2
    d2 = (w * w).sum(axis=1)[None, :] - 2.0 * (x @ w.T)
    winners = np.argmin(d2, axis=1)
    n = w.shape[0]
    counts = np.bincount(winners, minlength=n).astype(np.float64)
    onehot = np.zeros((x.shape[0], n))
    onehot[np.arange(x.shape[0]), winners] = 1.0
    sums = onehot.T @ x
    return (eta / x.shape[0]) * (sums - counts[:, None] * w)


def wta_online(
    w0: np.ndarray, x: np.ndarray, epochs: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample-by-sample WTA training with a per-neuron step of ``1 / wins``.

    Each neuron's step size is the reciprocal of the number of times it has
    won so far (counting its initial position as one win). With a stable
    assignment every neuron therefore tracks the running mean of the inputs
    it wins, which is the fixed point of the rule.
    """
    w = np.array(w0, dtype=np.float64)
    _check(w, x)
    wins = np.ones(w.shape[0])
    for _ in range(epochs):
        for xi in x[rng.permutation(x.shape[0])]:
            k = wta_select(w, xi)
            wins[k] += 1.0
            w = w + wta_update(w, xi, 1.0 / wins[k])
    return w


def reconstruction_residual(
    w: np.ndarray, x_batch: np.ndarray, f: Nonlinearity | str, k: int | None = None
) -> np.ndarray:
    """``x - sum_{j<=k} f(y_j) w_j`` for every row of ``x_batch``."""
    f = Nonlinearity(f)
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    _check(w, x_batch)
    k = w.shape[0] if k is None else k
    if not 1 <= k <= w.shape[0]:
        raise ValueError(f"k must be in [1, {w.shape[0]}], got {k}")
    wk = w[:k]
    return x_batch - f(x_batch @ wk.T) @ wk


def representation_error(
    w: np.ndarray, x_batch: np.ndarray, f: Nonlinearity | str, k: int | None = None
) -> float:
    """Batch mean of the squared reconstruction error using the first ``k`` neurons."""
    r = reconstruction_residual(w, x_batch, f, k)
    return float(np.mean(np.sum(r * r, axis=1)))
