import struct

import numpy as np
import pytest

from asymhash.dataio import (
    CODES_MAGIC,
    FEATURES_MAGIC,
    LABELS_MAGIC,
    FileFormatError,
    gen_synthetic_clusters,
    read_codes,
    read_features,
    read_features_csv,
    read_labels,
    read_labels_csv,
    read_model,
    split,
    write_codes,
    write_features,
    write_features_csv,
    write_labels,
    write_labels_csv,
    write_model,
)
from asymhash.encoder import init_encoder
from asymhash.hashcore import CodeMatrix
from asymhash.simgraph import LabelMatrix


class TestFeatureFormat:
    def test_round_trip_is_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        features = rng.normal(0, 1, (13, 7))
        path = tmp_path / "features.bin"
        write_features(path, features)
        back = read_features(path)
        assert back.dtype == np.float64
        assert np.array_equal(
            back.view(np.uint64), features.view(np.uint64)
        )

    def test_truncation_names_expected_and_actual(self, tmp_path):
        path = tmp_path / "features.bin"
        write_features(path, np.zeros((4, 3)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FileFormatError, match="expected 96 bytes, got 88") as info:
            read_features(path)
        assert info.value.offset == 24  # magic + two u64 header fields
        assert "offset" in str(info.value)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "features.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(FileFormatError, match="bad magic"):
            read_features(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "features.bin"
        path.write_bytes(FEATURES_MAGIC[:-1] + b"9" + b"\x00" * 16)
        with pytest.raises(FileFormatError, match="version"):
            read_features(path)

    def test_rejects_non_finite(self, tmp_path):
        with pytest.raises(ValueError, match="finite"):
            write_features(tmp_path / "x.bin", np.array([[np.inf]]))


class TestLabelFormat:
    def test_round_trip(self, tmp_path):
        labels = LabelMatrix([{0}, {3, 1}, {7, 2, 40}])
        path = tmp_path / "labels.bin"
        write_labels(path, labels)
        assert read_labels(path).label_sets == labels.label_sets

    def test_empty_row_rejected_on_read(self, tmp_path):
        path = tmp_path / "labels.bin"
        payload = LABELS_MAGIC + struct.pack("<Q", 1) + struct.pack("<I", 0)
        path.write_bytes(payload)
        with pytest.raises(FileFormatError, match="empty"):
            read_labels(path)

    def test_truncated_ids(self, tmp_path):
        path = tmp_path / "labels.bin"
        payload = LABELS_MAGIC + struct.pack("<Q", 1) + struct.pack("<I", 3)
        payload += struct.pack("<I", 1)  # one id instead of three
        path.write_bytes(payload)
        with pytest.raises(FileFormatError, match="truncated"):
            read_labels(path)


class TestCodeFormat:
    @pytest.mark.parametrize("code_len", [12, 24, 48, 64, 65, 130])
    def test_round_trip_non_word_multiples(self, tmp_path, code_len):
        rng = np.random.default_rng(code_len)
        codes = CodeMatrix.from_signs(rng.integers(0, 2, (9, code_len)) * 2 - 1)
        path = tmp_path / "codes.bin"
        write_codes(path, codes)
        back = read_codes(path)
        assert back == codes
        assert np.array_equal(back.to_signs(), codes.to_signs())

    def test_pad_bits_zero_on_disk(self, tmp_path):
        codes = CodeMatrix.from_signs(np.ones((3, 12), dtype=int))
        path = tmp_path / "codes.bin"
        write_codes(path, codes)
        words = np.frombuffer(path.read_bytes()[20:], dtype="<u8")
        assert (words >> np.uint64(12)).max() == 0

    def test_dirty_pad_bits_rejected(self, tmp_path):
        path = tmp_path / "codes.bin"
        header = CODES_MAGIC + struct.pack("<QI", 1, 12)
        path.write_bytes(header + struct.pack("<Q", 1 << 20))
        with pytest.raises(FileFormatError, match="pad bits"):
            read_codes(path)

    def test_truncated_rows(self, tmp_path):
        rng = np.random.default_rng(1)
        codes = CodeMatrix.from_signs(rng.integers(0, 2, (4, 16)) * 2 - 1)
        path = tmp_path / "codes.bin"
        write_codes(path, codes)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FileFormatError, match="expected 32 bytes, got 28"):
            read_codes(path)


class TestModelFormat:
    def test_round_trip_is_bitwise(self, tmp_path):
        model = init_encoder((6, 5, 4), rng_seed=2)
        path = tmp_path / "model.bin"
        write_model(path, model)
        back = read_model(path)
        assert back.layer_dims == (6, 5, 4)
        for got, want in zip(back.params(), model.params()):
            assert np.array_equal(got, want)

    def test_truncated_weights(self, tmp_path):
        model = init_encoder((3, 2), rng_seed=3)
        path = tmp_path / "model.bin"
        write_model(path, model)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FileFormatError, match="truncated"):
            read_model(path)


class TestSyntheticClusters:
    def test_zero_noise_collapses_clusters(self):
        features, labels = gen_synthetic_clusters(3, 4, 5, 0.0, seed=0)
        for cluster in range(3):
            rows = features[cluster * 4 : (cluster + 1) * 4]
            assert np.array_equal(rows, np.repeat(rows[:1], 4, axis=0))
        assert labels.label_sets[0] == frozenset({0})

    def test_nearest_center_accuracy(self):
        features, labels = gen_synthetic_clusters(10, 200, 32, 0.1, seed=1)
        centers = np.stack(
            [features[i * 200 : (i + 1) * 200].mean(axis=0) for i in range(10)]
        )
        dists = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        predicted = dists.argmin(axis=1)
        truth = np.repeat(np.arange(10), 200)
        assert (predicted == truth).mean() > 0.99

    def test_same_seed_identical_bytes(self, tmp_path):
        a, _ = gen_synthetic_clusters(4, 10, 6, 0.2, seed=9)
        b, _ = gen_synthetic_clusters(4, 10, 6, 0.2, seed=9)
        assert a.tobytes() == b.tobytes()

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError, match="noise"):
            gen_synthetic_clusters(2, 2, 2, -0.1, seed=0)


class TestSplit:
    def test_sizes_add_up(self):
        parts = split(10, 2, 2, seed=0)
        assert len(parts.db_indices) == 6
        assert len(parts.query_indices) == 2
        assert len(parts.val_indices) == 2

    def test_everything_defaults_to_database(self):
        parts = split(10, 0, 0, seed=0)
        assert np.array_equal(parts.db_indices, np.arange(10))

    def test_deterministic(self):
        first, second = split(100, 10, 5, seed=3), split(100, 10, 5, seed=3)
        assert np.array_equal(first.query_indices, second.query_indices)
        assert np.array_equal(first.db_indices, second.db_indices)

    def test_rejects_oversized_request(self):
        with pytest.raises(ValueError, match="database"):
            split(10, 6, 4, seed=0)


class TestCsv:
    def test_feature_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        features = rng.normal(0, 1, (5, 3))
        path = tmp_path / "features.csv"
        write_features_csv(path, features)
        assert np.array_equal(read_features_csv(path), features)

    def test_label_round_trip(self, tmp_path):
        labels = LabelMatrix([{1}, {0, 2}])
        path = tmp_path / "labels.csv"
        write_labels_csv(path, labels)
        assert read_labels_csv(path).label_sets == labels.label_sets

    def test_ragged_features_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0\n", encoding="utf-8")
        with pytest.raises(ValueError, match="widths"):
            read_features_csv(path)
