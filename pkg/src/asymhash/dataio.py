"""Dataset generation, splits, and bit-exact file formats.

All binary formats are little-endian and open with an 8-byte magic whose
last byte is the format version; readers reject anything else. Layouts:

  features  "ADSHFTR1"  u64 rows, u64 dim, then rows*dim f64 row-major
  labels    "ADSHLBL1"  u64 rows, then per row: u32 count, count u32 ids
  codes     "ADSHCOD1"  u64 rows, u32 code_len, then per row
                        ceil(code_len/64) u64 words (pad bits zero)
  model     "ADSHMDL1"  u32 layer-size count, that many u64 sizes, then per
                        affine layer: weights f64 row-major, biases f64
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .encoder import EncoderModel
from .hashcore import CodeMatrix, words_per_row
from .simgraph import LabelMatrix

FEATURES_MAGIC = b"ADSHFTR1"
LABELS_MAGIC = b"ADSHLBL1"
CODES_MAGIC = b"ADSHCOD1"
MODEL_MAGIC = b"ADSHMDL1"


class FileFormatError(ValueError):
    """A structural problem in a data file, located by byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class _Reader:
    def __init__(self, handle):
        self.handle = handle
        self.offset = 0

    def exact(self, count: int, what: str) -> bytes:
        data = self.handle.read(count)
        if len(data) != count:
            raise FileFormatError(
                f"truncated file reading {what}: expected {count} bytes, "
                f"got {len(data)}",
                self.offset,
            )
        self.offset += count
        return data

    def magic(self, expected: bytes) -> None:
        got = self.exact(len(expected), "magic")
        if got == expected:
            return
        if got[:-1] == expected[:-1]:
            raise FileFormatError(
                f"unsupported format version {got[-1:]!r}, expected "
                f"{expected[-1:]!r}",
                0,
            )
        raise FileFormatError(f"bad magic {got!r}, expected {expected!r}", 0)

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.exact(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.exact(8, what))[0]

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        data = self.exact(itemsize * count, what)
        return np.frombuffer(data, dtype=dtype, count=count)


def write_features(path, features) -> None:
    arr = np.ascontiguousarray(features, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError("features must be a 2-D matrix with dim >= 1")
    if not np.isfinite(arr).all():
        raise ValueError("features must be finite")
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f8").tobytes())


def read_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        reader = _Reader(fh)
        reader.magic(FEATURES_MAGIC)
        rows = reader.u64("row count")
        dim = reader.u64("feature dim")
        flat = reader.array("<f8", rows * dim, f"{rows}x{dim} feature matrix")
        return flat.astype(np.float64).reshape(rows, dim)


def write_labels(path, labels: LabelMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(LABELS_MAGIC)
        fh.write(struct.pack("<Q", len(labels)))
        for ids in labels.label_sets:
            ordered = sorted(ids)
            fh.write(struct.pack("<I", len(ordered)))
            fh.write(struct.pack(f"<{len(ordered)}I", *ordered))


def read_labels(path) -> LabelMatrix:
    with open(path, "rb") as fh:
        reader = _Reader(fh)
        reader.magic(LABELS_MAGIC)
        rows = reader.u64("row count")
        sets = []
        for r in range(rows):
            count = reader.u32(f"label count of row {r}")
            if count == 0:
                raise FileFormatError(f"label row {r} is empty", reader.offset - 4)
            sets.append(reader.array("<u4", count, f"label ids of row {r}"))
        return LabelMatrix(sets)


def write_codes(path, codes: CodeMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(CODES_MAGIC)
        fh.write(struct.pack("<QI", codes.rows, codes.code_len))
        fh.write(codes.words.astype("<u8").tobytes())


def read_codes(path) -> CodeMatrix:
    with open(path, "rb") as fh:
        reader = _Reader(fh)
        reader.magic(CODES_MAGIC)
        rows = reader.u64("row count")
        code_len = reader.u32("code length")
        if code_len < 1:
            raise FileFormatError("code length must be >= 1", reader.offset - 4)
        n_words = words_per_row(code_len)
        words = reader.array("<u8", rows * n_words, "packed code words")
        try:
            return CodeMatrix(
                words.astype(np.uint64).reshape(rows, n_words), rows, code_len
            )
        except ValueError as err:
            raise FileFormatError(str(err), len(CODES_MAGIC) + 12) from err


def write_model(path, model: EncoderModel) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(model.layer_dims)))
        fh.write(struct.pack(f"<{len(model.layer_dims)}Q", *model.layer_dims))
        for weights, biases in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(biases, dtype="<f8").tobytes())


def read_model(path) -> EncoderModel:
    with open(path, "rb") as fh:
        reader = _Reader(fh)
        reader.magic(MODEL_MAGIC)
        n_dims = reader.u32("layer-size count")
        if n_dims < 2:
            raise FileFormatError("model needs at least 2 layer sizes", 8)
        dims = tuple(int(d) for d in reader.array("<u8", n_dims, "layer sizes"))
        if any(d < 1 for d in dims):
            raise FileFormatError("layer sizes must be >= 1", 12)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            flat = reader.array(
                "<f8", fan_in * fan_out, f"{fan_in}x{fan_out} weights"
            )
            weights.append(flat.astype(np.float64).reshape(fan_in, fan_out))
            biases.append(
                reader.array("<f8", fan_out, f"{fan_out} biases").astype(np.float64)
            )
        return EncoderModel(layer_dims=dims, weights=weights, biases=biases)


def gen_synthetic_clusters(
    num_clusters: int, per_cluster: int, dim: int, noise: float, seed
):
    """Gaussian blobs around uniform centers in [-1, 1]^dim.

    Returns (features, labels) with the cluster id as each point's label.
    Deterministic for a given seed.
    """
    if num_clusters < 1 or per_cluster < 1 or dim < 1:
        raise ValueError("num_clusters, per_cluster, and dim must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1.0, 1.0, size=(num_clusters, dim))
    points = np.repeat(centers, per_cluster, axis=0)
    points = points + rng.normal(0.0, noise, size=points.shape)
    ids = np.repeat(np.arange(num_clusters), per_cluster)
    return points, LabelMatrix.from_ids(ids)


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint database / query / validation index sets."""

    db_indices: np.ndarray
    query_indices: np.ndarray
    val_indices: np.ndarray

    def __post_init__(self):
        groups = (self.db_indices, self.query_indices, self.val_indices)
        combined = np.concatenate(groups)
        if len(np.unique(combined)) != len(combined):
            raise ValueError("split groups must be disjoint")


def split(n: int, query_count: int, val_count: int, seed) -> DatasetSplit:
    """Uniform disjoint query and validation samples; the rest is database."""
    if query_count < 0 or val_count < 0:
        raise ValueError("counts must be >= 0")
    if query_count + val_count >= n:
        raise ValueError(
            f"query_count + val_count must leave database points: "
            f"{query_count} + {val_count} >= {n}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    query = np.sort(order[:query_count])
    val = np.sort(order[query_count : query_count + val_count])
    db = np.sort(order[query_count + val_count :])
    return DatasetSplit(db_indices=db, query_indices=query, val_indices=val)


def read_features_csv(path) -> np.ndarray:
    """Comma-separated floats, one feature row per line."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    if not rows:
        raise ValueError(f"no feature rows in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"inconsistent feature widths {sorted(widths)} in {path}")
    return np.array(rows, dtype=np.float64)


def write_features_csv(path, features) -> None:
    arr = np.asarray(features, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in arr:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_labels_csv(path) -> LabelMatrix:
    """Comma-separated label ids, one row per line."""
    sets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                sets.append([int(x) for x in line.split(",")])
    if not sets:
        raise ValueError(f"no label rows in {path}")
    return LabelMatrix(sets)


def write_labels_csv(path, labels: LabelMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ids in labels.label_sets:
            fh.write(",".join(str(i) for i in sorted(ids)) + "\n")
