"""Binary checkpoints for trained networks.

Layout (all integers little-endian, all reals little-endian float64)::

    b"HEBBNET1"  u32 version
    text spec            network descriptor lines
    u64 seed
    u32 ndim, u32 dims   input shape
    text config          key=value lines of the training config
    i64 epochs_completed, i64 chosen_epoch
    u32 n_layers, then per Hebbian layer:
        text name, array weights, array centering mean, u64 centering count
    array probe weights, array probe bias, f64 probe l2
    32-byte sha256 of everything above

``text`` is a u32 byte length followed by UTF-8; ``array`` is a u32 ndim,
u64 dims and the raw float64 payload in C order. Floats are never printed,
so a save/load/save cycle reproduces the file byte for byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conv import CenteringStats
from .errors import BuildError, CheckpointError
from .network import Network, NetworkSpec, TrainConfig, build_network

MAGIC = b"HEBBNET1"
VERSION = 1


@dataclass
class Checkpoint:
    network: Network
    config: TrainConfig


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def raw(self, b: bytes) -> None:
        self.buf.write(b)

    def u32(self, v: int) -> None:
        self.raw(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self.raw(struct.pack("<Q", v))

    def i64(self, v: int) -> None:
        self.raw(struct.pack("<q", v))

    def f64(self, v: float) -> None:
        self.raw(struct.pack("<d", v))

    def text(self, s: str) -> None:
        b = s.encode("utf-8")
        self.u32(len(b))
        self.raw(b)

    def array(self, a: np.ndarray) -> None:
        a = np.ascontiguousarray(a, dtype="<f8")
        self.u32(a.ndim)
        for d in a.shape:
            self.u64(d)
        self.raw(a.tobytes())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def _unpack(self, fmt: str):
        return struct.unpack(fmt, self.raw(struct.calcsize(fmt)))[0]

    def u32(self) -> int:
        return self._unpack("<I")

    def u64(self) -> int:
        return self._unpack("<Q")

    def i64(self) -> int:
        return self._unpack("<q")

    def f64(self) -> float:
        return self._unpack("<d")

    def text(self) -> str:
        return self.raw(self.u32()).decode("utf-8")

    def array(self) -> np.ndarray:
        ndim = self.u32()
        shape = tuple(self.u64() for _ in range(ndim))
        n = int(np.prod(shape)) if shape else 1
        return np.frombuffer(self.raw(8 * n), dtype="<f8").reshape(shape).astype(np.float64)


def _config_text(cfg: TrainConfig) -> str:
    return "".join(f"{k}={v!r}\n" for k, v in cfg.echo().items())


def _parse_config(text: str) -> TrainConfig:
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    values = {}
    for line in text.splitlines():
        key, _, raw = line.partition("=")
        if key not in fields:
            raise CheckpointError(f"unknown config key {key!r} in checkpoint")
        if raw in ("True", "False"):
            values[key] = raw == "True"
        elif fields[key] in (int, "int"):
            values[key] = int(raw)
        else:
            values[key] = float(raw)
    return TrainConfig(**values)


def dumps(net: Network, cfg: TrainConfig) -> bytes:
    w = _Writer()
    w.raw(MAGIC)
    w.u32(VERSION)
    w.text(net.spec.to_text())
    w.u64(net.spec.seed & 0xFFFFFFFFFFFFFFFF)
    w.u32(len(net.input_shape))
    for d in net.input_shape:
        w.u32(d)
    w.text(_config_text(cfg))
    w.i64(net.epochs_completed)
    w.i64(net.chosen_epoch)
    w.u32(net.n_hebbian)
    for layer in net.hebbian:
        w.text(layer.name)
        w.array(layer.weights)
        w.array(layer.centering.mean)
        w.u64(layer.centering.count)
    w.array(net.probe.weights)
    w.array(net.probe.bias)
    w.f64(net.probe.l2)
    body = w.buf.getvalue()
    return body + hashlib.sha256(body).digest()


def loads(data: bytes) -> Checkpoint:
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"not a checkpoint: magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
    r = _Reader(data)
    r.raw(len(MAGIC))
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (this build reads {VERSION})")
    if len(data) < len(MAGIC) + 4 + 32:
        raise CheckpointError("checkpoint is truncated")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint checksum mismatch (file corrupted or truncated)")
    r.data = body
    spec_text = r.text()
    seed = r.u64()
    input_shape = tuple(r.u32() for _ in range(r.u32()))
    cfg = _parse_config(r.text())
    epochs_completed, chosen_epoch = r.i64(), r.i64()
    try:
        spec = NetworkSpec.from_text(spec_text, seed)
        net = build_network(spec, input_shape, cfg.probe_l2)
    except BuildError as exc:
        raise CheckpointError(f"checkpoint spec does not build: {exc}") from exc
    n = r.u32()
    if n != net.n_hebbian:
        raise CheckpointError(f"checkpoint has {n} Hebbian layers, spec declares {net.n_hebbian}")
    for k in range(n):
        name, weights, mean, count = r.text(), r.array(), r.array(), r.u64()
        layer = net.hebbian[k]
        if weights.shape != layer.weights.shape or mean.shape != (layer.in_dim,):
            raise CheckpointError(f"layer {name!r}: stored shape {weights.shape} does not match the network spec")
        net.hebbian[k] = dataclasses.replace(layer, name=name, weights=weights,
                                             centering=CenteringStats(mean, count))
    pw, pb, l2 = r.array(), r.array(), r.f64()
    if pw.shape != net.probe.weights.shape or pb.shape != net.probe.bias.shape:
        raise CheckpointError(f"probe shape {pw.shape} does not match the network spec")
    net.probe = dataclasses.replace(net.probe, weights=pw, bias=pb, l2=l2)
    if r.pos != len(body):
        raise CheckpointError(f"{len(body) - r.pos} unexpected trailing bytes in checkpoint")
    net.epochs_completed = epochs_completed
    net.chosen_epoch = chosen_epoch
    return Checkpoint(net, cfg)


def save_checkpoint(path: str | Path, net: Network, cfg: TrainConfig) -> None:
    """Write atomically: a temporary file in the target directory, then rename."""
    path = Path(path)
    data = dumps(net, cfg)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from exc
    return loads(data)
