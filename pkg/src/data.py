"""
Dataset Module
IDX (MNIST / Fashion-MNIST) and CSV ingestion, synthetic blobs and split management.
"""

import gzip
import os
import re
import struct
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

import config
from src.utils.exceptions import ContractViolation, CsvParseError, IdxFormatError
from src.utils.logger import get_logger

logger = get_logger(__name__)

IDX_IMAGE_MAGIC = 0x00000803  # 2051
IDX_LABEL_MAGIC = 0x00000801  # 2049

IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

SPLITS = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    k: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    name: str = "dataset"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def indices(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise ContractViolation(f"Unknown split '{split}', expected one of {SPLITS}")
        return getattr(self, f"{split}_idx")

    def subset(self, split: str) -> Tuple[np.ndarray, np.ndarray]:
        idx = self.indices(split)
        return self.x[idx], self.y[idx]

    def split_sizes(self) -> Dict[str, int]:
        return {s: int(self.indices(s).size) for s in SPLITS}

    def validate(self):
        """Labels in range, finite inputs, splits partitioning [0, N)."""
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise ContractViolation(f"Inconsistent shapes x={self.x.shape} y={self.y.shape}")
        if self.k < 1:
            raise ContractViolation(f"Class count must be positive, got {self.k}")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.k):
            raise ContractViolation(f"Labels must lie in [0, {self.k})")
        if not np.all(np.isfinite(self.x)):
            raise ContractViolation("Inputs contain NaN or Inf")
        if self.metadata.get("pixel_scaling") and self.x.size:
            if self.x.min() < 0.0 or self.x.max() > 1.0:
                raise ContractViolation("Pixel inputs must be scaled into [0, 1]")
        combined = np.concatenate([self.train_idx, self.val_idx, self.test_idx])
        if combined.size != self.n or not np.array_equal(np.sort(combined), np.arange(self.n)):
            raise ContractViolation("Splits must be disjoint and cover every sample")


def _from_arrays(x, y, k=None, name="dataset", metadata=None) -> Dataset:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if k is None and y.size == 0:
        raise ContractViolation("Cannot infer the class count of an empty dataset")
    k = int(k) if k is not None else int(y.max()) + 1
    empty = np.zeros(0, dtype=np.int64)
    return Dataset(x=x, y=y, k=k, train_idx=np.arange(x.shape[0], dtype=np.int64),
                   val_idx=empty, test_idx=empty.copy(), name=name, metadata=metadata or {})


# --- IDX ---

def _read_bytes(path: str) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _resolve(path: str) -> str:
    """Accept either the raw IDX path or its gzipped sibling."""
    if os.path.exists(path):
        return path
    if os.path.exists(path + ".gz"):
        return path + ".gz"
    raise FileNotFoundError(path)


def _parse_idx(raw: bytes, magic: int, ndim: int, path: str) -> np.ndarray:
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise IdxFormatError("File shorter than its magic number", len(raw), path)
    found, = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxFormatError(f"Bad magic number 0x{found:08x}, expected 0x{magic:08x}", 0, path)
    if len(raw) < header:
        raise IdxFormatError(f"File shorter than its {header}-byte header", len(raw), path)
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = int(np.prod(dims, dtype=np.int64))
    available = len(raw) - header
    if available < expected:
        raise IdxFormatError(
            f"Truncated payload: {available} of {expected} bytes present", len(raw), path)
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header).reshape(dims)


def load_idx(images_path: str, labels_path: str, num_classes: int = 10,
             name: str = "idx") -> Dataset:
    """
    Load an IDX image/label pair into a Dataset fragment.
    Images are flattened and divided by 255; every sample lands in the train split.
    """
    images_path = _resolve(images_path)
    labels_path = _resolve(labels_path)
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGE_MAGIC, 3, images_path)
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABEL_MAGIC, 1, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"Image count {images.shape[0]} does not match label count {labels.shape[0]}",
            4, labels_path)
    if labels.size and labels.max() >= num_classes:
        raise IdxFormatError(f"Label {labels.max()} outside [0, {num_classes})", 8, labels_path)

    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    logger.info(f"Loaded {x.shape[0]} IDX samples of dimension {x.shape[1]} from {images_path}")
    return _from_arrays(x, labels, k=num_classes, name=name,
                        metadata={"source": "idx", "pixel_scaling": "divide_by_255"})


def load_mnist(data_dir: str, name: str = "mnist", rng: Optional[np.random.Generator] = None,
               val_size: int = config.MNIST_VALIDATION_SIZE,
               train_subset: Optional[int] = None) -> Dataset:
    """
    Canonical train/test files; the last `val_size` training samples after a
    seeded shuffle become validation. `train_subset` keeps only that many
    of the remaining training samples.
    """
    if rng is None:
        raise ContractViolation("load_mnist needs an rng for the validation carve-out")
    paths = {key: os.path.join(data_dir, fname) for key, fname in IDX_FILES.items()}
    train = load_idx(paths["train_images"], paths["train_labels"], name=name)
    test = load_idx(paths["test_images"], paths["test_labels"], name=name)

    n_train = train.n
    if not 0 <= val_size < n_train:
        raise ContractViolation(f"val_size={val_size} must be in [0, {n_train})")
    order = rng.permutation(n_train)
    train_part, val_part = order[:n_train - val_size], order[n_train - val_size:]
    if train_subset is not None:
        if not 1 <= train_subset <= train_part.size:
            raise ContractViolation(f"train_subset={train_subset} outside [1, {train_part.size}]")
        train_part = train_part[:train_subset]

    x = np.concatenate([train.x, test.x])
    y = np.concatenate([train.y, test.y])
    used = np.sort(np.concatenate([train_part, val_part]))
    keep = np.concatenate([used, np.arange(n_train, n_train + test.n)])
    # Reindex so dropped training samples vanish from the partition
    remap = np.full(x.shape[0], -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    ds = Dataset(
        x=x[keep], y=y[keep], k=10,
        train_idx=np.sort(remap[train_part]),
        val_idx=np.sort(remap[val_part]),
        test_idx=remap[n_train:n_train + test.n],
        name=name,
        metadata={"source": "idx", "pixel_scaling": "divide_by_255",
                  "validation_carve_out": f"last {val_size} after seeded shuffle",
                  "train_subset": train_subset},
    )
    logger.info(f"{name}: split sizes {ds.split_sizes()}")
    return ds


# --- CSV ---

def load_csv(path: str, header: bool = False, name: str = "csv") -> Dataset:
    """Last column is the integer label, the others are features."""
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str,
                            skip_blank_lines=False, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise CsvParseError(str(e), _parser_error_line(str(e)), path) from e
    except pd.errors.EmptyDataError as e:
        raise CsvParseError("File is empty", 1, path) from e
    if frame.shape[1] < 2:
        raise CsvParseError("Need at least one feature column and a label column", 1, path)

    first_line = 2 if header else 1
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad_rows = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad_rows.size:
        raise CsvParseError("Non-numeric, missing or non-finite value", first_line + int(bad_rows[0]), path)

    # %.17g exports parse back bit-exactly from the raw text
    data = frame.to_numpy(dtype=str).astype(np.float64)
    labels = data[:, -1]
    bad_labels = np.flatnonzero((labels != np.round(labels)) | (labels < 0))
    if bad_labels.size:
        raise CsvParseError("Label must be a non-negative integer",
                            first_line + int(bad_labels[0]), path)
    logger.info(f"Loaded {data.shape[0]} CSV rows with {data.shape[1] - 1} features from {path}")
    return _from_arrays(data[:, :-1], labels.astype(np.int64), name=name,
                        metadata={"source": "csv"})


def _parser_error_line(message: str) -> int:
    # pandas reports "... in line N, saw M"
    match = re.search(r"line (\d+)", message)
    return int(match.group(1)) if match else 0


# --- Synthetic blobs ---

def make_blobs(k: int, n_per_class: int, dim: int, center_spread: float,
               noise_sigma: float, rng: np.random.Generator) -> Dataset:
    """Gaussian blobs around centers drawn uniformly in [-spread, spread]^dim."""
    if k < 2 or dim < 2 or n_per_class < 1:
        raise ContractViolation("make_blobs needs k >= 2, dim >= 2, n_per_class >= 1")
    if noise_sigma <= 0:
        raise ContractViolation("noise_sigma must be positive")
    centers = rng.uniform(-center_spread, center_spread, size=(k, dim))
    y = np.repeat(np.arange(k), n_per_class)
    x = centers[y] + rng.normal(0.0, noise_sigma, size=(y.size, dim))
    return _from_arrays(x, y, k=k, name="blobs", metadata={
        "source": "blobs", "centers": centers.tolist(), "noise_sigma": noise_sigma})


# --- Splits ---

def _split_count(n: int, fraction: float) -> int:
    return int(np.floor(n * fraction + 0.5))


def split(ds: Dataset, val_fraction: float, test_fraction: float,
          rng: np.random.Generator) -> Dataset:
    """Shuffled disjoint train/val/test partition of every sample."""
    if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1:
        raise ContractViolation("Fractions must be non-negative and sum below 1")
    n = ds.n
    n_val, n_test = _split_count(n, val_fraction), _split_count(n, test_fraction)
    if (val_fraction > 0 and n_val == 0) or (test_fraction > 0 and n_test == 0):
        raise ContractViolation(f"Dataset of {n} samples too small for the requested splits")
    if n - n_val - n_test < 1:
        raise ContractViolation("No samples left for training")

    order = rng.permutation(n)
    return replace(
        ds,
        test_idx=np.sort(order[:n_test]),
        val_idx=np.sort(order[n_test:n_test + n_val]),
        train_idx=np.sort(order[n_test + n_val:]),
        metadata={**ds.metadata, "val_fraction": val_fraction, "test_fraction": test_fraction},
    )


def with_test_set(train: Dataset, test: Dataset, val_fraction: float,
                  rng: np.random.Generator) -> Dataset:
    """Held-out test file becomes the test split; validation is carved from the training file."""
    if train.dim != test.dim:
        raise ContractViolation(f"Train dimension {train.dim} != test dimension {test.dim}")
    carved = split(train, val_fraction, 0.0, rng)
    n = train.n
    return Dataset(
        x=np.concatenate([train.x, test.x]),
        y=np.concatenate([train.y, test.y]),
        k=max(train.k, test.k),
        train_idx=carved.train_idx,
        val_idx=carved.val_idx,
        test_idx=np.arange(n, n + test.n, dtype=np.int64),
        name=train.name,
        metadata={**carved.metadata, "test_fraction": None, "test_source": "held-out file"},
    )
