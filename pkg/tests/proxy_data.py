"""CIFAR-10-format proxy built from sample photographs bundled with
scikit-image and scikit-learn.

Each class is one source photograph; an example is a random 32x32 crop of it
(at one of two scales, randomly mirrored). It is a natural-image stand-in for
pipeline tests when the real dataset is not on disk. Accuracy numbers on it
say nothing about CIFAR-10.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from hebbpca.data import write_cifar10_dir

SKIMAGE_SOURCES = [
    "astronaut.png", "chelsea.png", "coffee.png", "hubble_deep_field.jpg", "ihc.png",
    "motorcycle_left.png", "retina.jpg", "rocket.jpg",
]


def source_images() -> list[np.ndarray]:
    import skimage.data
    import skimage.io
    from sklearn.datasets import load_sample_images

    root = Path(skimage.data.data_dir)
    imgs = [skimage.io.imread(root / name)[..., :3] for name in SKIMAGE_SOURCES]
    imgs += list(load_sample_images().images)
    return [np.ascontiguousarray(im, dtype=np.uint8) for im in imgs]


def random_crops(n: int, rng: np.random.Generator, sources=None) -> tuple[np.ndarray, np.ndarray]:
    sources = sources or source_images()
    labels = rng.integers(0, len(sources), size=n)
    out = np.empty((n, 3, 32, 32), dtype=np.uint8)
    for i, c in enumerate(labels):
        im = sources[c]
        scale = int(rng.integers(1, 3))
        h, w = im.shape[0] // scale, im.shape[1] // scale
        r, s = rng.integers(0, h - 32), rng.integers(0, w - 32)
        crop = im[r * scale : (r + 32) * scale : scale, s * scale : (s + 32) * scale : scale]
        if rng.random() < 0.5:
            crop = crop[:, ::-1]
        out[i] = crop.transpose(2, 0, 1)
    return out, labels.astype(np.uint8)


def make_proxy_cifar_dir(directory: str | Path, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    sources = source_images()
    tr_x, tr_y = random_crops(50000, rng, sources)
    te_x, te_y = random_crops(10000, rng, sources)
    write_cifar10_dir(directory, tr_x, tr_y, te_x, te_y)
    return Path(directory)
