"""MNIST IDX loading, labeled/unlabeled/test splits, synthetic oracle data.

The unlabeled pool's true labels survive only inside QuarantinedLabels,
which exposes no reader here; the sole sanctioned accessor lives in the
metrics module and feeds TP/P reporting, never training.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .studentt import normal_cdf

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801
_IDX_DTYPES = {0x08: np.dtype(np.uint8), 0x0D: np.dtype(">f4"),
               0x0E: np.dtype(">f8")}
_IDX_CODES = {np.dtype(np.uint8): 0x08, np.dtype(np.float32): 0x0D,
              np.dtype(np.float64): 0x0E}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxFormatError(ValueError):
    """Malformed IDX payload; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def parse_idx(data: bytes) -> np.ndarray:
    """Generic IDX decoder: magic, big-endian extents, raw values."""
    if len(data) < 4:
        raise IdxFormatError("payload shorter than the 4-byte magic", 0)
    zero, dtype_code, ndim = data[0] << 8 | data[1], data[2], data[3]
    if zero != 0:
        raise IdxFormatError("first two magic bytes must be zero", 0)
    if dtype_code not in _IDX_DTYPES:
        raise IdxFormatError(f"unsupported IDX dtype code 0x{dtype_code:02x}", 2)
    if not 1 <= ndim <= 3:
        raise IdxFormatError(f"unsupported IDX rank {ndim}", 3)
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise IdxFormatError("truncated extents header", len(data))
    shape = struct.unpack(f">{ndim}I", data[4:header_end])
    dtype = _IDX_DTYPES[dtype_code]
    nbytes = int(np.prod(shape)) * dtype.itemsize
    if len(data) < header_end + nbytes:
        raise IdxFormatError(
            f"truncated payload: expected {nbytes} value bytes, "
            f"got {len(data) - header_end}", len(data))
    if len(data) > header_end + nbytes:
        raise IdxFormatError("trailing bytes after payload", header_end + nbytes)
    values = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)),
                           offset=header_end)
    return values.reshape(shape).astype(dtype.newbyteorder("="), copy=False)


def parse_idx_images(data: bytes) -> np.ndarray:
    """(N, rows, cols) float64 images scaled into [0, 1] by /255."""
    magic = struct.unpack(">I", data[:4])[0] if len(data) >= 4 else -1
    if magic != IDX_MAGIC_IMAGES:
        raise IdxFormatError(
            f"wrong magic 0x{magic:08x}, expected 0x{IDX_MAGIC_IMAGES:08x}", 0)
    raw = parse_idx(data)
    return raw.astype(np.float64) / 255.0


def parse_idx_labels(data: bytes) -> np.ndarray:
    """(N,) int64 class labels in [0, 10)."""
    magic = struct.unpack(">I", data[:4])[0] if len(data) >= 4 else -1
    if magic != IDX_MAGIC_LABELS:
        raise IdxFormatError(
            f"wrong magic 0x{magic:08x}, expected 0x{IDX_MAGIC_LABELS:08x}", 0)
    raw = parse_idx(data)
    bad = np.nonzero(raw > 9)[0]
    if bad.size:
        raise IdxFormatError(
            f"label byte {int(raw[bad[0]])} out of range 0-9", 8 + int(bad[0]))
    return raw.astype(np.int64)


def write_idx(array: np.ndarray) -> bytes:
    """Serialize an array to IDX bytes (uint8, float32 or float64)."""
    arr = np.asarray(array)
    code = _IDX_CODES.get(arr.dtype)
    if code is None:
        raise ValueError(f"cannot serialize dtype {arr.dtype} to IDX")
    if not 1 <= arr.ndim <= 3:
        raise ValueError(f"IDX supports rank 1-3, got {arr.ndim}")
    header = struct.pack(f">BBBB{arr.ndim}I", 0, 0, code, arr.ndim, *arr.shape)
    return header + arr.astype(arr.dtype.newbyteorder(">"), copy=False).tobytes()


def write_idx_images(images: np.ndarray) -> bytes:
    """Inverse of parse_idx_images; exact round-trip for /255 pixel values."""
    return write_idx(np.round(np.asarray(images) * 255.0).astype(np.uint8))


def write_idx_labels(labels: np.ndarray) -> bytes:
    return write_idx(np.asarray(labels).astype(np.uint8))


# -- datasets and splits ----------------------------------------------


@dataclass
class Dataset:
    """Images (N,1,H,W) or feature vectors (N,D), plus optional labels."""

    images: np.ndarray
    labels: np.ndarray | None

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.images):
            raise ValueError("images and labels must have equal length")

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, indices: np.ndarray) -> "Dataset":
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.images[indices], labels)


class QuarantinedLabels:
    """True labels of the unlabeled pool, sealed for reporting only.

    No accessor here on purpose: training code receives this object and
    can do nothing with it; the metrics module holds the one reader.
    """

    def __init__(self, values: np.ndarray):
        self.__values = np.asarray(values).copy()
        self.__values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.__values)


@dataclass
class Split:
    labeled: Dataset
    unlabeled: Dataset  # labels stripped; truth lives in unlabeled_truth
    unlabeled_truth: QuarantinedLabels
    test: Dataset
    seed: int
    labeled_indices: np.ndarray = field(default_factory=lambda: np.array([], int))
    unlabeled_indices: np.ndarray = field(default_factory=lambda: np.array([], int))


def make_split(data: Dataset, labeled_n: int, unlabeled_n: int | None,
               seed: int, test: Dataset | None = None) -> Split:
    """Disjoint uniform-random labeled/unlabeled selection, seed-determined.

    unlabeled_n None means "all remaining".  The labeled set is not
    class-balanced: selection is purely random.
    """
    n = len(data)
    if data.labels is None:
        raise ValueError("make_split needs a labeled source dataset")
    if labeled_n > n:
        raise ValueError(f"labeled_n {labeled_n} exceeds dataset size {n}")
    if unlabeled_n is None:
        unlabeled_n = n - labeled_n
    if labeled_n + unlabeled_n > n:
        raise ValueError(
            f"labeled_n + unlabeled_n = {labeled_n + unlabeled_n} exceeds {n}")
    perm = np.random.default_rng(seed).permutation(n)
    lab_idx = np.sort(perm[:labeled_n])
    unl_idx = np.sort(perm[labeled_n:labeled_n + unlabeled_n])
    unl = data.subset(unl_idx)
    truth = QuarantinedLabels(unl.labels)
    if test is None:
        test = Dataset(data.images[:0], data.labels[:0])
    return Split(labeled=data.subset(lab_idx),
                 unlabeled=Dataset(unl.images, None),
                 unlabeled_truth=truth, test=test, seed=seed,
                 labeled_indices=lab_idx, unlabeled_indices=unl_idx)


def save_manifest(split: Split, path: str | Path) -> None:
    """Plain-text index lists reproducing the split."""
    with open(path, "w") as f:
        f.write(f"seed {split.seed}\n[labeled]\n")
        f.writelines(f"{i}\n" for i in split.labeled_indices)
        f.write("[unlabeled]\n")
        f.writelines(f"{i}\n" for i in split.unlabeled_indices)


def load_manifest(path: str | Path) -> tuple[int, np.ndarray, np.ndarray]:
    seed, sections, current = 0, {"labeled": [], "unlabeled": []}, None
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line.startswith("seed "):
            seed = int(line.split()[1])
        elif line.startswith("["):
            current = line.strip("[]")
        elif line:
            sections[current].append(int(line))
    return seed, np.array(sections["labeled"]), np.array(sections["unlabeled"])


def load_mnist(data_dir: str | Path, train_pool: int = 50000,
               dtype=np.float64) -> tuple[Dataset, Dataset]:
    """Load MNIST IDX files; keep the first `train_pool` training samples.

    The experiments use a 50,000-sample training pool even though the
    official file holds 60,000.
    """
    data_dir = Path(data_dir)
    blobs = {}
    for key, name in MNIST_FILES.items():
        path = data_dir / name
        if not path.exists():
            raise FileNotFoundError(
                f"missing MNIST file {path}; run `selftrain fetch-data` or set "
                f"data_dir to a directory holding the IDX files")
        blobs[key] = path.read_bytes()
    train_x = parse_idx_images(blobs["train_images"])[:train_pool]
    train_y = parse_idx_labels(blobs["train_labels"])[:train_pool]
    test_x = parse_idx_images(blobs["test_images"])
    test_y = parse_idx_labels(blobs["test_labels"])
    train = Dataset(train_x[:, None, :, :].astype(dtype), train_y)
    test = Dataset(test_x[:, None, :, :].astype(dtype), test_y)
    return train, test


def synth_two_gaussians(n_labeled: int, n_unlabeled: int, n_test: int,
                        means: np.ndarray, shared_sigma: float, seed: int,
                        dtype=np.float64) -> tuple[Split, float]:
    """Two spherical Gaussians with equal priors and a known Bayes rate.

    Returns the split plus the closed-form Bayes accuracy
    Phi(d / 2) with d the Mahalanobis distance between the means.
    """
    means = np.asarray(means, dtype=np.float64)
    if means.shape[0] != 2:
        raise ValueError("exactly two class means required")
    if shared_sigma <= 0:
        raise ValueError("shared_sigma must be positive")
    gap = np.linalg.norm(means[1] - means[0])
    if gap == 0:
        raise ValueError("class means must differ")
    bayes_accuracy = normal_cdf(gap / (2.0 * shared_sigma))

    rng = np.random.default_rng(seed)

    def draw(count: int) -> Dataset:
        labels = rng.integers(0, 2, size=count)
        x = means[labels] + shared_sigma * rng.standard_normal(
            (count, means.shape[1]))
        return Dataset(x.astype(dtype), labels.astype(np.int64))

    labeled = draw(n_labeled)
    unlabeled = draw(n_unlabeled)
    test = draw(n_test)
    split = Split(labeled=labeled,
                  unlabeled=Dataset(unlabeled.images, None),
                  unlabeled_truth=QuarantinedLabels(unlabeled.labels),
                  test=test, seed=seed,
                  labeled_indices=np.arange(n_labeled),
                  unlabeled_indices=np.arange(n_unlabeled))
    return split, bayes_accuracy
