"""Linear softmax probe trained with plain mini-batch SGD."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class LinearProbe:
    weights: np.ndarray  # (K, D)
    bias: np.ndarray  # (K,)
    l2: float = 5e-4

    @classmethod
    def init(cls, num_classes: int, feat_dim: int, rng: np.random.Generator, l2: float = 5e-4):
        a = 1.0 / np.sqrt(feat_dim)
        return cls(rng.uniform(-a, a, size=(num_classes, feat_dim)), np.zeros(num_classes), l2)

    @classmethod
    def zeros(cls, num_classes: int, feat_dim: int, l2: float = 0.0):
        return cls(np.zeros((num_classes, feat_dim)), np.zeros(num_classes), l2)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feat_dim(self) -> int:
        return self.weights.shape[1]


def probe_forward(p: LinearProbe, features: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != p.feat_dim:
        raise DimensionError(f"features have {features.shape[1]} dims, probe expects {p.feat_dim}")
    return features @ p.weights.T + p.bias


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(p: LinearProbe, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= p.num_classes):
        raise ValueError(f"labels must lie in [0, {p.num_classes}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    return labels.astype(np.intp)


def probe_loss(p: LinearProbe, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy plus ``(l2/2) * ||W||^2``."""
    labels = _check_labels(p, labels)
    logits = probe_forward(p, features)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    ce = -np.mean(logp[np.arange(len(labels)), labels])
    return float(ce + 0.5 * p.l2 * np.sum(p.weights**2))


def probe_gradients(p: LinearProbe, features: np.ndarray, labels: np.ndarray):
    """Analytic ``(dL/dW, dL/db)`` of :func:`probe_loss`."""
    labels = _check_labels(p, labels)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    probs = softmax(probe_forward(p, features))
    probs[np.arange(len(labels)), labels] -= 1.0
    g = probs / len(labels)
    return g.T @ features + p.l2 * p.weights, g.sum(axis=0)


def probe_sgd_step(p: LinearProbe, features, labels, eta: float) -> LinearProbe:
    if eta <= 0:
        raise ValueError("eta must be positive")
    gw, gb = probe_gradients(p, features, labels)
    return dataclasses.replace(p, weights=p.weights - eta * gw, bias=p.bias - eta * gb)


def predict(p: LinearProbe, features: np.ndarray) -> np.ndarray:
    return np.argmax(probe_forward(p, features), axis=1)


def evaluate_accuracy(p: LinearProbe, features, labels, batch_size: int = 4096) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    hits = 0
    for s in range(0, len(labels), batch_size):
        hits += int(np.sum(predict(p, features[s : s + batch_size]) == labels[s : s + batch_size]))
    return hits / len(labels)


def probe_lr(eta: float, epoch: int, epochs: int) -> float:
    """Constant for the first half of the budget, then halved every two epochs."""
    half = epochs // 2
    if epoch < half:
        return eta
    return eta * 0.5 ** ((epoch - half) // 2 + 1)


@dataclass
class ProbeHistory:
    val_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def best_val(self) -> float:
        return self.val_acc[self.best_epoch]

    @property
    def test_at_best(self) -> float:
        return self.test_acc[self.best_epoch] if self.test_acc else float("nan")


def best_epoch(val_acc: list[float]) -> int:
    """Index of the highest validation accuracy; earliest on ties."""
    return int(np.argmax(val_acc))


def train_probe(
    p: LinearProbe,
    train: tuple[np.ndarray, np.ndarray],
    val: tuple[np.ndarray, np.ndarray],
    test: tuple[np.ndarray, np.ndarray] | None = None,
    *,
    epochs: int = 20,
    batch_size: int = 64,
    eta: float = 1e-3,
    seed: int = 0,
    early_stopping: bool = True,
) -> tuple[LinearProbe, ProbeHistory]:
    """Fit a probe on fixed features, keeping the best-validation epoch."""
    x, y = train
    rng = np.random.default_rng(seed)
    hist = ProbeHistory()
    best = p
    for epoch in range(epochs):
        lr = probe_lr(eta, epoch, epochs)
        order = rng.permutation(len(y))
        losses = []
        for s in range(0, len(y), batch_size):
            idx = order[s : s + batch_size]
            losses.append(probe_loss(p, x[idx], y[idx]) * len(idx))
            p = probe_sgd_step(p, x[idx], y[idx], lr)
        hist.train_loss.append(float(np.sum(losses) / len(y)))
        hist.val_acc.append(evaluate_accuracy(p, *val))
        if test is not None:
            hist.test_acc.append(evaluate_accuracy(p, *test))
        if not early_stopping or best_epoch(hist.val_acc) == epoch:
            best = p
    hist.best_epoch = best_epoch(hist.val_acc) if early_stopping else epochs - 1
    return best, hist
