"""Brute-force reference computations used to check the learning rules.

Nothing in the training path imports this module. The eigensolver is a
plain cyclic Jacobi iteration so that it shares no code with LAPACK-backed
routines or with the Hebbian rules it is meant to judge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class EigenBasis:
    eigenvalues: np.ndarray  # (k,) descending
    eigenvectors: np.ndarray  # (k, D), orthonormal rows
    degenerate: bool = False


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * trace`` (or ``tol`` when the trace is zero). Returns
    ``(eigenvalues, V)`` with eigenvectors in the columns of ``V``, unsorted.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"square matrix required, got {a.shape}")
    v = np.eye(n)
    scale = abs(np.trace(a))
    thresh = tol * scale if scale > 0 else tol
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
        if off < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J on rows/cols p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def empirical_covariance(x: np.ndarray) -> np.ndarray:
    """``(1/n) Xc^T Xc`` with ``Xc`` the mean-centered rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean(axis=0)
    return xc.T @ xc / x.shape[0]


def batch_pca(x: np.ndarray, k: int | None = None) -> EigenBasis:
    """Top-``k`` principal components of the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("batch_pca needs at least 2 samples")
    k = d if k is None else k
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    cov = empirical_covariance(x)
    vals, vecs = jacobi_eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order][:k]
    rows = vecs[:, order].T[:k].copy()
    for r in rows:
        if r[np.argmax(np.abs(r))] < 0:
            r *= -1.0
    degenerate = bool(np.trace(cov) <= 0.0)
    if degenerate:
        vals = np.zeros(k)
    return EigenBasis(vals, rows, degenerate)


def assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(x[:, None, :] - centroids[None, :, :], axis=2)
    return np.argmin(d, axis=1)


def within_cluster_ss(x: np.ndarray, centroids: np.ndarray) -> float:
    labels = assign(x, centroids)
    return float(np.sum((x - centroids[labels]) ** 2))


def lloyd_step(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One assignment + mean-update pass. Empty clusters keep their centroid."""
    labels = assign(x, centroids)
    new = centroids.copy()
    for j in range(centroids.shape[0]):
        members = x[labels == j]
        if len(members):
            new[j] = members.mean(axis=0)
    return new, labels


def kmeans(x: np.ndarray, k: int, init: list[int] | np.ndarray, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm from the given initial sample indices."""
    x = np.asarray(x, dtype=np.float64)
    init = np.asarray(init, dtype=int)
    if k > x.shape[0]:
        raise ValueError(f"k={k} exceeds number of samples {x.shape[0]}")
    if len(init) != k or len(set(init.tolist())) != k:
        raise ValueError("init must hold k distinct indices")
    centroids = x[init].copy()
    labels = None
    for _ in range(max_iter):
        centroids, new_labels = lloyd_step(x, centroids)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
    return centroids


class Alignment(NamedTuple):
    values: np.ndarray
    zero_norm: np.ndarray  # bool mask of rows of W with zero norm


def cosine_alignment(w: np.ndarray, basis: EigenBasis | np.ndarray) -> Alignment:
    """Per-row ``|cos|`` between ``w[i]`` and eigenvector ``i``."""
    v = basis.eigenvectors if isinstance(basis, EigenBasis) else np.asarray(basis)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != v.shape:
        raise ValueError(f"shape mismatch {w.shape} vs {v.shape}")
    wn = np.linalg.norm(w, axis=1)
    vn = np.linalg.norm(v, axis=1)
    zero = wn == 0.0
    denom = np.where(zero, 1.0, wn * vn)
    vals = np.abs(np.sum(w * v, axis=1)) / denom
    vals[zero] = 0.0
    return Alignment(vals, zero)
