"""Dataset readers (CIFAR-10 binary, MNIST IDX), deterministic splits and
synthetic generators for oracle tests."""

from __future__ import annotations

import dataclasses
import gzip
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError

CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_RECORDS_PER_FILE = 10000
CIFAR_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_FILE = "test_batch.bin"
CIFAR_SPLIT = (40000, 10000, 10000)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class DatasetSplit:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    mean: np.ndarray  # per-channel, subtracted after scaling to [0, 1]
    std: np.ndarray
    num_classes: int = 10
    checksum: str = ""
    name: str = ""

    @property
    def input_shape(self) -> tuple[int, ...]:
        return tuple(self.train_x.shape[1:])

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train_y), len(self.val_y), len(self.test_y)

    def split(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        return getattr(self, f"{which}_x"), getattr(self, f"{which}_y")


def channel_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population std of ``(N, C, H, W)`` images."""
    axes = (0, 2, 3)
    mean = x.mean(axis=axes)
    std = x.std(axis=axes)
    return mean, np.where(std > 0, std, 1.0)


def standardize(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (x - mean[None, :, None, None]) / std[None, :, None, None]


# -- CIFAR-10 ---------------------------------------------------------------


def decode_cifar_records(buf: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Raw records -> ``(uint8 images (N, 3, 32, 32), uint8 labels (N,))``."""
    if len(buf) % CIFAR_RECORD:
        raise DataFormatError(f"{len(buf)} bytes is not a whole number of {CIFAR_RECORD}-byte records")
    rec = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].copy()
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataFormatError(f"record {bad}: label byte {labels[bad]} > 9")
    return rec[:, 1:].reshape(-1, 3, 32, 32).copy(), labels


def encode_cifar_records(images: np.ndarray, labels: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 3 * 32 * 32)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    if len(images) != len(labels):
        raise ValueError("images/labels length mismatch")
    return np.concatenate([labels, images], axis=1).tobytes()


def _read_cifar_file(path: Path) -> bytes:
    if not path.is_file():
        raise DataFormatError(f"missing CIFAR-10 file {path}")
    buf = path.read_bytes()
    expected = CIFAR_RECORD * CIFAR_RECORDS_PER_FILE
    if len(buf) != expected:
        raise DataFormatError(f"{path}: {len(buf)} bytes, expected {expected}")
    return buf


def load_cifar10(
    directory: str | Path,
    limit_per_split: tuple[int | None, int | None, int | None] | None = None,
) -> DatasetSplit:
    """Load the binary CIFAR-10 release.

    Train is the first 40000 records of ``data_batch_1..5``, validation the
    last 10000, test is ``test_batch``. Limits keep the first records of each
    region. Pixels are scaled to [0, 1] and standardized per channel with
    statistics of the (possibly limited) training split.
    """
    directory = Path(directory)
    digest = hashlib.sha256()
    chunks = []
    for name in CIFAR_TRAIN_FILES + [CIFAR_TEST_FILE]:
        buf = _read_cifar_file(directory / name)
        digest.update(buf)
        chunks.append(buf)
    train_img, train_lab = decode_cifar_records(b"".join(chunks[:5]))
    test_img, test_lab = decode_cifar_records(chunks[5])

    n_train, n_val, n_test = CIFAR_SPLIT
    lt, lv, ls = limit_per_split or (None, None, None)
    lt = n_train if lt is None else min(lt, n_train)
    lv = n_val if lv is None else min(lv, n_val)
    ls = n_test if ls is None else min(ls, n_test)

    tx = train_img[:lt].astype(np.float64) / 255.0
    vx = train_img[n_train : n_train + lv].astype(np.float64) / 255.0
    sx = test_img[:ls].astype(np.float64) / 255.0
    mean, std = channel_stats(tx)
    return DatasetSplit(
        standardize(tx, mean, std), train_lab[:lt].astype(np.int64),
        standardize(vx, mean, std), train_lab[n_train : n_train + lv].astype(np.int64),
        standardize(sx, mean, std), test_lab[:ls].astype(np.int64),
        mean, std, 10, digest.hexdigest(), "cifar10",
    )


def write_cifar10_dir(directory: str | Path, train_images, train_labels, test_images, test_labels) -> None:
    """Write images/labels into the six-file binary layout (fixtures, proxies)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    per = CIFAR_RECORDS_PER_FILE
    if len(train_labels) != 5 * per or len(test_labels) != per:
        raise ValueError("CIFAR-10 layout needs 50000 train and 10000 test records")
    for i, name in enumerate(CIFAR_TRAIN_FILES):
        sl = slice(i * per, (i + 1) * per)
        (directory / name).write_bytes(encode_cifar_records(train_images[sl], train_labels[sl]))
    (directory / CIFAR_TEST_FILE).write_bytes(encode_cifar_records(test_images, test_labels))


# -- MNIST IDX ---------------------------------------------------------------


def parse_idx(buf: bytes, magic: int) -> np.ndarray:
    """Parse an unsigned-byte IDX payload with the expected big-endian magic."""
    if len(buf) < 8:
        raise DataFormatError("IDX file too short")
    (got,) = struct.unpack(">I", buf[:4])
    if got != magic:
        raise DataFormatError(f"bad IDX magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = got & 0xFF
    header = 4 + 4 * ndim
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    n = int(np.prod(dims))
    if len(buf) != header + n:
        raise DataFormatError(f"IDX payload has {len(buf) - header} bytes, header says {n}")
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims).copy()


def encode_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    return struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()


def _read_maybe_gz(directory: Path, stem: str) -> bytes:
    for name in (stem, stem + ".gz"):
        p = directory / name
        if p.is_file():
            raw = p.read_bytes()
            return gzip.decompress(raw) if name.endswith(".gz") else raw
    raise DataFormatError(f"missing MNIST file {directory / stem}")


def _load_idx_pair(directory: Path, prefix: str) -> tuple[np.ndarray, np.ndarray, bytes]:
    ib = _read_maybe_gz(directory, f"{prefix}-images-idx3-ubyte")
    lb = _read_maybe_gz(directory, f"{prefix}-labels-idx1-ubyte")
    images = parse_idx(ib, IDX_IMAGES_MAGIC)
    labels = parse_idx(lb, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(f"{prefix}: {images.shape[0]} images but {labels.shape[0]} labels")
    if images.shape[1:] != (28, 28):
        raise DataFormatError(f"{prefix}: expected 28x28 images, got {images.shape[1:]}")
    return images, labels, ib + lb


def load_mnist_idx(directory: str | Path) -> DatasetSplit:
    """MNIST from IDX files; the last sixth of the training file is validation."""
    directory = Path(directory)
    tr_img, tr_lab, b1 = _load_idx_pair(directory, "train")
    te_img, te_lab, b2 = _load_idx_pair(directory, "t10k")
    n_val = len(tr_lab) // 6
    n_tr = len(tr_lab) - n_val
    scale = lambda a: a[:, None, :, :].astype(np.float64) / 255.0  # noqa: E731
    return DatasetSplit(
        scale(tr_img[:n_tr]), tr_lab[:n_tr].astype(np.int64),
        scale(tr_img[n_tr:]), tr_lab[n_tr:].astype(np.int64),
        scale(te_img), te_lab.astype(np.int64),
        np.zeros(1), np.ones(1), 10, hashlib.sha256(b1 + b2).hexdigest(), "mnist",
    )


# -- synthetic -----------------------------------------------------------------


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))[None, :]


def synth_gaussian(
    dim: int,
    n: int,
    eigenvalues,
    seed: int,
    rotate: bool = True,
) -> np.ndarray:
    """``n`` zero-mean Gaussian samples with covariance ``R diag(eig) R^T``.

    ``R`` is a random rotation drawn from ``seed`` (identity if ``rotate`` is
    false).
    """
    eig = np.asarray(eigenvalues, dtype=np.float64)
    if eig.shape != (dim,):
        raise ValueError(f"need {dim} eigenvalues, got {eig.shape}")
    if np.any(eig < 0) or not np.all(np.isfinite(eig)):
        raise ValueError("covariance eigenvalues must be finite and non-negative")
    rng = np.random.default_rng(seed)
    r = random_rotation(dim, rng) if rotate else np.eye(dim)
    z = rng.standard_normal((n, dim)) * np.sqrt(eig)[None, :]
    return z @ r.T


def synth_mixture(centroids, sigma: float, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian mixture with uniformly chosen components."""
    c = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, c.shape[0], size=n)
    return c[labels] + sigma * rng.standard_normal((n, c.shape[1])), labels


SYNTH_SHAPE = (1, 4, 4)
SYNTH_EIGENVALUES = tuple(2.0 ** (3 - i) for i in range(16))


def synthetic_dataset(n: tuple[int, int, int] = (4000, 1000, 1000), seed: int = 0) -> DatasetSplit:
    """Two-class Gaussian images with a decaying covariance spectrum.

    The label is the sign of the projection onto the top principal axis, so a
    probe on correctly learned components separates the classes.
    """
    dim = int(np.prod(SYNTH_SHAPE))
    total = sum(n)
    rng = np.random.default_rng(seed)
    rot = random_rotation(dim, rng)
    z = rng.standard_normal((total, dim)) * np.sqrt(np.asarray(SYNTH_EIGENVALUES))[None, :]
    x = (z @ rot.T).reshape(total, *SYNTH_SHAPE)
    y = (z[:, 0] > 0).astype(np.int64)
    a, b = n[0], n[0] + n[1]
    digest = hashlib.sha256(x.tobytes()).hexdigest()
    return DatasetSplit(x[:a], y[:a], x[a:b], y[a:b], x[b:], y[b:],
                        np.zeros(1), np.ones(1), 2, digest, "synthetic")


def limit_split(data: DatasetSplit, limits: tuple[int | None, int | None, int | None] | None) -> DatasetSplit:
    """Keep the first records of each split. Normalization is left as loaded."""
    if limits is None:
        return data
    lt, lv, ls = (None if v is None else int(v) for v in limits)
    return dataclasses.replace(
        data,
        train_x=data.train_x[:lt], train_y=data.train_y[:lt],
        val_x=data.val_x[:lv], val_y=data.val_y[:lv],
        test_x=data.test_x[:ls], test_y=data.test_y[:ls],
    )
