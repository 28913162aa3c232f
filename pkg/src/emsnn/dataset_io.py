"""File formats and the synthetic point generator.

``*.emsnn``  points, ``<6s Q I 2s`` header (magic ``EMSNN1``, n, dims, ``f8``)
             followed by n*dims little-endian float64, row-major.
``*.emknn``  k-NN matrix, ``<6s Q I 2s`` header (magic ``EMKNN1``, n, k, ``u8``)
             followed by n*k little-endian uint64 point ids, row-major.
``*.labels.csv``   ``point_id,label`` per line, no header.
``*.metrics.csv``  ``phase,block_reads,block_writes,bytes_read,bytes_written,elapsed_ms``.

The generator draws from xorshift64* (shifts 12/25/27, multiplier
0x2545F4914F6CDD1D) seeded through splitmix64, turns the top 53 bits into
doubles in [0, 1) and uses Box-Muller for normals. It stands in for the
unspecified random data of the original experiments.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

POINTS_MAGIC = b"EMSNN1"
KNN_MAGIC = b"EMKNN1"
_HEADER = struct.Struct("<6sQI2s")
HEADER_SIZE = _HEADER.size

METRICS_COLUMNS = ("phase", "block_reads", "block_writes", "bytes_read", "bytes_written", "elapsed_ms")


@dataclass(frozen=True)
class DatasetHeader:
    n_points: int
    dims: int
    element: str = "f8"

    @property
    def payload_bytes(self) -> int:
        return self.n_points * self.dims * 8


@dataclass(frozen=True)
class KnnHeader:
    n_points: int
    k: int
    element: str = "u8"

    @property
    def payload_bytes(self) -> int:
        return self.n_points * self.k * 8


@dataclass(frozen=True)
class GenSpec:
    n_points: int
    dims: int
    n_clusters: int = 1
    spread: float = 1.0
    box: tuple = (-100.0, 100.0)
    seed: int = 0

    def validate(self):
        if self.n_points < 1 or self.dims < 1:
            raise ConfigError("n_points and dims must be >= 1")
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")
        if not self.spread >= 0:
            raise ConfigError("spread must be >= 0")
        if not self.box[0] <= self.box[1]:
            raise ConfigError("box must be (low, high) with low <= high")


def splitmix64(seed: int) -> int:
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 31
    return z or 0x9E3779B97F4A7C15  # xorshift state must be nonzero


_MASK = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0


class _XorShift:
    def __init__(self, seed):
        self.x = splitmix64(seed & _MASK)

    def next(self):
        x = self.x
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.x = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def uniform(self):
        return (self.next() >> 11) * _INV_2_53


def _gaussian_blobs(seed, n, dims, n_clusters, spread, lo, hi):
    # Plain Python on purpose: numba's cos/log may differ from libm in the last ulp.
    rng = _XorShift(seed)
    centers = np.empty((n_clusters, dims))
    for c in range(n_clusters):
        for d in range(dims):
            centers[c, d] = lo + (hi - lo) * rng.uniform()
    out = np.empty((n, dims))
    spare = None
    for i in range(n):
        c = rng.next() % n_clusters
        for d in range(dims):
            if spare is not None:
                z, spare = spare, None
            else:
                u1 = 1.0 - rng.uniform()
                u2 = rng.uniform()
                rad = math.sqrt(-2.0 * math.log(u1))
                z = rad * math.cos(2.0 * math.pi * u2)
                spare = rad * math.sin(2.0 * math.pi * u2)
            out[i, d] = centers[c, d] + spread * z
    return out


def generate_points(spec: GenSpec) -> np.ndarray:
    """Deterministic Gaussian blobs as an (n, dims) float64 array.

    Cluster centers are uniform in ``box`` on every axis; each point picks a
    cluster with ``next() % n_clusters`` and adds ``spread`` times a normal
    draw per coordinate.
    """
    spec.validate()
    lo, hi = float(spec.box[0]), float(spec.box[1])
    return _gaussian_blobs(spec.seed, spec.n_points, spec.dims, spec.n_clusters, float(spec.spread), lo, hi)


def _write(path, magic, n, width, tag, payload: np.ndarray):
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, n, width, tag))
        fh.write(payload.tobytes())
    return path


def write_points(points, path) -> Path:
    points = np.ascontiguousarray(points, dtype="<f8")
    if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
        raise ConfigError("points must be a non-empty 2-D array")
    return _write(path, POINTS_MAGIC, points.shape[0], points.shape[1], b"f8", points)


def write_knn(knn, path) -> Path:
    knn = np.ascontiguousarray(knn, dtype="<u8")
    if knn.ndim != 2 or knn.shape[0] < 1 or knn.shape[1] < 1:
        raise ConfigError("knn must be a non-empty 2-D array")
    return _write(path, KNN_MAGIC, knn.shape[0], knn.shape[1], b"u8", knn)


def generate_dataset(spec: GenSpec, path) -> Path:
    return write_points(generate_points(spec), path)


def read_header(path):
    """Parse and check the header of a ``.emsnn`` or ``.emknn`` file."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        raw = fh.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, n, width, tag = _HEADER.unpack(raw)
    if magic == POINTS_MAGIC:
        if tag != b"f8":
            raise FormatError(f"{path}: unsupported element tag {tag!r}")
        header = DatasetHeader(n, width)
    elif magic == KNN_MAGIC:
        if tag != b"u8":
            raise FormatError(f"{path}: unsupported element tag {tag!r}")
        header = KnnHeader(n, width)
    else:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if n < 1 or width < 1:
        raise FormatError(f"{path}: n_points and width must be >= 1")
    if size - HEADER_SIZE != header.payload_bytes:
        raise FormatError(
            f"{path}: payload is {size - HEADER_SIZE} bytes, header implies {header.payload_bytes}"
        )
    return header


validate = read_header


def read_points(path) -> np.ndarray:
    header = read_header(path)
    if not isinstance(header, DatasetHeader):
        raise FormatError(f"{path}: not a points file")
    data = np.fromfile(path, dtype="<f8", offset=HEADER_SIZE)
    return data.reshape(header.n_points, header.dims).astype(np.float64)


def read_knn(path) -> np.ndarray:
    header = read_header(path)
    if not isinstance(header, KnnHeader):
        raise FormatError(f"{path}: not a k-NN file")
    data = np.fromfile(path, dtype="<u8", offset=HEADER_SIZE).reshape(header.n_points, header.k)
    if (data >= header.n_points).any():
        raise FormatError(f"{path}: neighbor id out of range")
    if (data[:, 0] != np.arange(header.n_points, dtype=np.uint64)).any():
        raise FormatError(f"{path}: row i must start with i")
    srt = np.sort(data, axis=1)
    if (srt[:, 1:] == srt[:, :-1]).any():
        raise FormatError(f"{path}: repeated id within a row")
    return data.astype(np.int64)


def write_labels(labels, path) -> Path:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ConfigError("labels must be a non-empty 1-D sequence")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.writelines(f"{i},{lab}\n" for i, lab in enumerate(labels.tolist()))
    return path


def read_labels(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [(int(a), int(b)) for a, b in csv.reader(fh)]
    ids = [a for a, _ in rows]
    if ids != list(range(len(rows))):
        raise FormatError(f"{path}: point ids must ascend from 0")
    return np.array([b for _, b in rows], dtype=np.int64)


def write_metrics(phases, path) -> Path:
    """One row per :class:`~emsnn.em_model.PhaseMetrics`."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for p in phases:
            w.writerow([p.phase, p.block_reads, p.block_writes, p.bytes_read, p.bytes_written,
                        f"{p.elapsed_ms:.3f}"])
    return path
