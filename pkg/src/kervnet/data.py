"""MNIST ingestion, normalization, deterministic batching, synthetic data.

IDX parsing follows the big-endian container: images carry magic 2051
(0x00000803) then (count, rows, cols) and raw bytes; labels carry magic
2049 (0x00000801) then count bytes.  Pixels are scaled to [0, 1] and then
standardized with mean/std computed from the training images; the
statistics travel with the dataset so test splits and adversarial
clamping stay consistent.  Gzip-compressed files are accepted and
decompressed on load.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError, LengthError
from .tensor import DTYPE

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

EXPECTED_FILES = (
    "train-images-idx3-ubyte[.gz]",
    "train-labels-idx1-ubyte[.gz]",
    "t10k-images-idx3-ubyte[.gz]",
    "t10k-labels-idx1-ubyte[.gz]",
)


@dataclass(frozen=True)
class NormalizationStats:
    mean: float
    std: float


@dataclass
class Dataset:
    """Normalized images (N, 1, 28, 28) with integer labels 0..9."""

    images: np.ndarray
    labels: np.ndarray
    stats: NormalizationStats

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(
                f"image count {len(self.images)} != label count {len(self.labels)}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise DataError(
                f"labels outside 0..9: range "
                f"[{int(self.labels.min())}, {int(self.labels.max())}]")

    def __len__(self):
        return len(self.labels)

    def raw_images(self) -> np.ndarray:
        """Undo standardization back to [0, 1] pixel units."""
        return self.images * self.stats.std + self.stats.mean

    def to_bytes_images(self) -> np.ndarray:
        """Recover the original 0..255 byte values (integer rounding)."""
        raw = np.clip(np.rint(self.raw_images() * 255.0), 0, 255)
        return raw.astype(np.uint8)


def _read_file(path) -> bytes:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] == b"\x1f\x8b":
        blob = gzip.decompress(blob)
    return blob


def _read_be32(blob: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(blob):
        raise LengthError(f"file truncated while reading {what}")
    return struct.unpack_from(">I", blob, offset)[0]


def parse_idx_images(blob: bytes) -> np.ndarray:
    magic = _read_be32(blob, 0, "image magic")
    if magic != IMAGE_MAGIC:
        raise FormatError(
            f"bad image magic: expected 0x{IMAGE_MAGIC:08x}, found 0x{magic:08x}")
    count = _read_be32(blob, 4, "image count")
    rows = _read_be32(blob, 8, "row count")
    cols = _read_be32(blob, 12, "column count")
    need = 16 + count * rows * cols
    if len(blob) < need:
        raise LengthError(
            f"image file truncated: need {need} bytes, have {len(blob)}")
    pixels = np.frombuffer(blob, np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols)


def parse_idx_labels(blob: bytes) -> np.ndarray:
    magic = _read_be32(blob, 0, "label magic")
    if magic != LABEL_MAGIC:
        raise FormatError(
            f"bad label magic: expected 0x{LABEL_MAGIC:08x}, found 0x{magic:08x}")
    count = _read_be32(blob, 4, "label count")
    need = 8 + count
    if len(blob) < need:
        raise LengthError(
            f"label file truncated: need {need} bytes, have {len(blob)}")
    return np.frombuffer(blob, np.uint8, count=count, offset=8).astype(np.int64)


def images_to_idx_bytes(images_u8: np.ndarray) -> bytes:
    n, rows, cols = images_u8.shape
    return struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + \
        np.ascontiguousarray(images_u8, dtype=np.uint8).tobytes()


def labels_to_idx_bytes(labels: np.ndarray) -> bytes:
    return struct.pack(">II", LABEL_MAGIC, len(labels)) + \
        np.asarray(labels, dtype=np.uint8).tobytes()


def normalize(images_u8: np.ndarray,
              stats: NormalizationStats | None = None):
    """Scale bytes to [0, 1], then standardize; returns (images, stats)."""
    scaled = images_u8.astype(DTYPE) / 255.0
    if stats is None:
        mean = float(scaled.mean())
        std = float(scaled.std())
        if std == 0.0:
            std = 1.0
        stats = NormalizationStats(mean, std)
    images = (scaled - stats.mean) / stats.std
    return images, stats


def load_mnist_idx(images_path, labels_path,
                   stats: NormalizationStats | None = None) -> Dataset:
    """Load an IDX image/label pair.

    Pass ``stats=None`` for the training split (statistics are computed
    from these images) and the training dataset's ``stats`` for the test
    split.
    """
    images_u8 = parse_idx_images(_read_file(images_path))
    labels = parse_idx_labels(_read_file(labels_path))
    if len(images_u8) != len(labels):
        raise DataError(
            f"image count {len(images_u8)} != label count {len(labels)}")
    images, stats = normalize(images_u8, stats)
    return Dataset(images[:, None, :, :], labels, stats)


def batches(dataset: Dataset, batch_size: int, seed: int, epoch: int):
    """Yield (images, labels) minibatches in a seeded per-epoch order.

    Every sample appears exactly once per epoch; the final short batch is
    emitted.  The order is a pure function of (seed, epoch).
    """
    n = len(dataset)
    if batch_size > n:
        raise DataError(f"batch_size {batch_size} exceeds dataset size {n}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]


def synthetic_blobs(n_per_class: int, classes: int, seed: int) -> Dataset:
    """Class-conditioned gaussian blobs rendered into 28x28 images.

    Class c gets a fixed center on a ring around the image middle; samples
    jitter the center slightly, so classes stay linearly separable by
    construction.  Useful as a fast stand-in for MNIST in smoke tests.
    """
    if n_per_class < 1 or classes < 1:
        raise DataError("n_per_class and classes must be >= 1")
    if classes > 10:
        raise DataError("at most 10 classes (labels stay in 0..9)")
    rng = np.random.Generator(np.random.PCG64(seed))
    side = 28
    yy, xx = np.mgrid[0:side, 0:side]
    angle = 2.0 * np.pi * np.arange(classes) / classes
    centers = np.stack([14.0 + 7.0 * np.sin(angle), 14.0 + 7.0 * np.cos(angle)],
                       axis=1)
    images = np.empty((classes * n_per_class, 1, side, side), dtype=DTYPE)
    labels = np.empty(classes * n_per_class, dtype=np.int64)
    i = 0
    for c in range(classes):
        for _ in range(n_per_class):
            cy, cx = centers[c] + rng.normal(0.0, 0.8, size=2)
            sigma = 2.0 + 0.3 * rng.random()
            img = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma ** 2))
            images[i, 0] = img
            labels[i] = c
            i += 1
    images_u8 = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    normed, stats = normalize(images_u8[:, 0])
    return Dataset(normed[:, None, :, :], labels, stats)
