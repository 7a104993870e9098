"""Tests for IDX/CSV ingestion, synthetic blobs and splits."""

import gzip
import itertools
import os
import struct

import numpy as np
import pytest

from src import data
from src.clusterlab.kmeans import kmeans_restarts
from src.clusterlab.metrics import hungarian_align
from src.utils.exceptions import ContractViolation, CsvParseError, IdxFormatError


def _idx_images(images: np.ndarray) -> bytes:
    n, rows, cols = images.shape
    return struct.pack(">IIII", data.IDX_IMAGE_MAGIC, n, rows, cols) + images.astype(np.uint8).tobytes()


def _idx_labels(labels: np.ndarray) -> bytes:
    return struct.pack(">II", data.IDX_LABEL_MAGIC, labels.size) + labels.astype(np.uint8).tobytes()


def _write(path, raw: bytes):
    with open(path, "wb") as f:
        f.write(raw)
    return str(path)


@pytest.fixture
def idx_pair(tmp_path):
    gen = np.random.default_rng(0)
    images = gen.integers(0, 256, size=(6, 3, 2))
    labels = np.array([0, 1, 2, 3, 4, 5])
    return (_write(tmp_path / "img", _idx_images(images)),
            _write(tmp_path / "lbl", _idx_labels(labels)), images, labels)


def _fake_mnist_dir(root, n_train=30, n_test=8):
    gen = np.random.default_rng(1)
    os.makedirs(root, exist_ok=True)
    files = {
        "train_images": _idx_images(gen.integers(0, 256, size=(n_train, 4, 4))),
        "train_labels": _idx_labels(np.arange(n_train) % 10),
        "test_images": _idx_images(gen.integers(0, 256, size=(n_test, 4, 4))),
        "test_labels": _idx_labels(np.arange(n_test) % 10),
    }
    for key, raw in files.items():
        _write(os.path.join(root, data.IDX_FILES[key]), raw)
    return str(root)


class TestIdxLoader:

    def test_loads_and_scales(self, idx_pair):
        """Pixels are flattened and divided by 255."""
        img, lbl, images, labels = idx_pair
        ds = data.load_idx(img, lbl)
        assert ds.x.shape == (6, 6)
        np.testing.assert_allclose(ds.x, images.reshape(6, -1) / 255.0)
        np.testing.assert_array_equal(ds.y, labels)
        assert ds.metadata["pixel_scaling"] == "divide_by_255"
        assert ds.x.min() >= 0.0 and ds.x.max() <= 1.0

    def test_gzip_sibling(self, tmp_path, idx_pair):
        """A missing raw file falls back to its .gz sibling."""
        _, lbl, images, _ = idx_pair
        with gzip.open(tmp_path / "gz-img.gz", "wb") as f:
            f.write(_idx_images(images))
        ds = data.load_idx(str(tmp_path / "gz-img"), lbl)
        assert ds.n == 6

    def test_bad_magic_reports_offset_zero(self, tmp_path, idx_pair):
        """Swapped magic numbers fail at byte 0."""
        _, lbl, _, _ = idx_pair
        with pytest.raises(IdxFormatError) as err:
            data.load_idx(lbl, lbl)
        assert err.value.offset == 0

    def test_truncated_payload(self, tmp_path, idx_pair):
        """A short payload reports the file length as offset."""
        _, lbl, images, _ = idx_pair
        raw = _idx_images(images)[:-5]
        path = _write(tmp_path / "short", raw)
        with pytest.raises(IdxFormatError) as err:
            data.load_idx(path, lbl)
        assert err.value.offset == len(raw)
        assert "byte offset" in str(err.value)

    def test_truncated_header(self, tmp_path, idx_pair):
        """Fewer bytes than the header is an error."""
        _, lbl, _, _ = idx_pair
        path = _write(tmp_path / "stub", b"\x00\x00\x08")
        with pytest.raises(IdxFormatError) as err:
            data.load_idx(path, lbl)
        assert err.value.offset == 3

    def test_count_mismatch(self, tmp_path, idx_pair):
        """Image and label counts must agree."""
        img, _, _, _ = idx_pair
        path = _write(tmp_path / "few", _idx_labels(np.array([0, 1, 2])))
        with pytest.raises(IdxFormatError) as err:
            data.load_idx(img, path)
        assert err.value.offset == 4


class TestMnistPreset:

    def test_validation_carve_out(self, tmp_path):
        """Train file minus val_size for training, val_size for validation, test file for test."""
        root = _fake_mnist_dir(tmp_path / "mnist")
        ds = data.load_mnist(root, rng=np.random.default_rng(0), val_size=5)
        assert ds.split_sizes() == {"train": 25, "val": 5, "test": 8}
        assert ds.k == 10

    def test_train_subset(self, tmp_path):
        """train_subset drops the remaining training samples from the dataset."""
        root = _fake_mnist_dir(tmp_path / "mnist")
        ds = data.load_mnist(root, rng=np.random.default_rng(0), val_size=5, train_subset=10)
        assert ds.split_sizes() == {"train": 10, "val": 5, "test": 8}
        assert ds.n == 23

    def test_seeded_carve_out_is_deterministic(self, tmp_path):
        """Same rng seed, same validation indices."""
        root = _fake_mnist_dir(tmp_path / "mnist")
        a = data.load_mnist(root, rng=np.random.default_rng(3), val_size=5)
        b = data.load_mnist(root, rng=np.random.default_rng(3), val_size=5)
        np.testing.assert_array_equal(a.val_idx, b.val_idx)
        np.testing.assert_array_equal(a.x, b.x)

    def test_missing_files(self, tmp_path):
        """Absent files raise FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            data.load_mnist(str(tmp_path), rng=np.random.default_rng(0))


class TestCsvLoader:

    def test_last_column_is_label(self, tmp_path):
        """Features then an integer label per row."""
        path = tmp_path / "d.csv"
        path.write_text("0.5,1.5,0\n2.0,-1.0,2\n")
        ds = data.load_csv(str(path))
        np.testing.assert_allclose(ds.x, [[0.5, 1.5], [2.0, -1.0]])
        np.testing.assert_array_equal(ds.y, [0, 2])
        assert ds.k == 3

    def test_header_row(self, tmp_path):
        """With a header the first data row is line 2."""
        path = tmp_path / "h.csv"
        path.write_text("f0,f1,label\n0.1,0.2,1\n0.3,oops,0\n")
        with pytest.raises(CsvParseError) as err:
            data.load_csv(str(path), header=True)
        assert err.value.line == 3

    def test_non_numeric_line_number(self, tmp_path):
        """Non-numeric tokens report their 1-based line."""
        path = tmp_path / "bad.csv"
        path.write_text("1,2,0\n3,4,1\n5,abc,1\n")
        with pytest.raises(CsvParseError) as err:
            data.load_csv(str(path))
        assert err.value.line == 3

    def test_ragged_row(self, tmp_path):
        """Too many fields on a row is a parse error at that line."""
        path = tmp_path / "ragged.csv"
        path.write_text("1,2,0\n3,4,1\n5,6,7,1\n")
        with pytest.raises(CsvParseError) as err:
            data.load_csv(str(path))
        assert err.value.line == 3

    def test_fractional_label(self, tmp_path):
        """Labels must be integers."""
        path = tmp_path / "frac.csv"
        path.write_text("1,2,0\n3,4,1.5\n")
        with pytest.raises(CsvParseError) as err:
            data.load_csv(str(path))
        assert err.value.line == 2

    @pytest.mark.parametrize("token", ["inf", "-inf", "nan"])
    def test_non_finite_value_line_number(self, tmp_path, token):
        """Infinite or NaN cells are parse errors at their line."""
        path = tmp_path / "nonfinite.csv"
        path.write_text(f"0.5,1.0,1\n{token},1.0,1\n")
        with pytest.raises(CsvParseError) as err:
            data.load_csv(str(path))
        assert err.value.line == 2


class TestBlobs:

    def test_shapes_and_labels(self, rng):
        """k * n_per_class samples with balanced labels."""
        ds = data.make_blobs(k=3, n_per_class=5, dim=4, center_spread=2.0, noise_sigma=0.1, rng=rng)
        assert ds.x.shape == (15, 4)
        np.testing.assert_array_equal(np.bincount(ds.y), [5, 5, 5])

    def test_seeded(self):
        """Same seed, same blobs."""
        a = data.make_blobs(3, 5, 4, 2.0, 0.1, np.random.default_rng(9))
        b = data.make_blobs(3, 5, 4, 2.0, 0.1, np.random.default_rng(9))
        np.testing.assert_array_equal(a.x, b.x)

    def test_rejects_bad_parameters(self, rng):
        """Non-positive noise is rejected."""
        with pytest.raises(ContractViolation):
            data.make_blobs(3, 5, 4, 2.0, 0.0, rng)

    def test_separated_blobs_cluster_cleanly(self):
        """k-means on raw well-separated blobs recovers the classes."""
        for seed in range(100):
            ds = data.make_blobs(k=4, n_per_class=25, dim=2, center_spread=10.0, noise_sigma=0.5,
                                 rng=np.random.default_rng(seed))
            centers = np.array(ds.metadata["centers"])
            gaps = [np.linalg.norm(a - b) for a, b in itertools.combinations(centers, 2)]
            if min(gaps) > 5.0:
                break
        result = kmeans_restarts(ds.x, 4, np.random.default_rng(0), n_init=10)
        assert hungarian_align(result.assignments, ds.y).accuracy > 0.95


class TestSplit:

    def test_partition(self, rng):
        """Splits are disjoint and cover every sample."""
        ds = data.make_blobs(4, 25, 3, 2.0, 0.5, rng)
        parts = data.split(ds, 0.2, 0.1, rng)
        assert parts.split_sizes() == {"train": 70, "val": 20, "test": 10}
        combined = np.concatenate([parts.train_idx, parts.val_idx, parts.test_idx])
        np.testing.assert_array_equal(np.sort(combined), np.arange(100))

    def test_too_small(self, rng):
        """A requested split that rounds to zero samples is an error."""
        ds = data.make_blobs(2, 1, 2, 1.0, 0.1, rng)
        with pytest.raises(ContractViolation):
            data.split(ds, 0.1, 0.1, rng)

    def test_with_test_set(self, rng):
        """A held-out file becomes the test split."""
        train = data.make_blobs(2, 10, 3, 1.0, 0.1, rng)
        test = data.make_blobs(2, 3, 3, 1.0, 0.1, rng)
        ds = data.with_test_set(train, test, 0.2, rng)
        assert ds.split_sizes() == {"train": 16, "val": 4, "test": 6}
        np.testing.assert_array_equal(ds.test_idx, np.arange(20, 26))

    def test_invalid_labels_rejected(self):
        """Labels outside [0, K) break the dataset contract."""
        with pytest.raises(ContractViolation):
            data._from_arrays(np.zeros((2, 2)), np.array([0, 3]), k=2)
