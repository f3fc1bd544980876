"""Bit-packed binary codes and Hamming-space algebra.

Codes are vectors over {-1, +1}. In packed form, bit k of word w holds
code position w * 64 + k (little-endian within each 64-bit word), with a
set bit meaning +1. Pad bits past ``code_len`` are always zero, so packed
rows compare bit-exactly regardless of how they were produced.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

WORD_BITS = 64
_WORD_BYTES = WORD_BITS // 8


def words_per_row(code_len: int) -> int:
    return (code_len + WORD_BITS - 1) // WORD_BITS


class PackedRow(NamedTuple):
    """A single packed code row plus its logical bit length."""

    words: np.ndarray  # uint64, shape (words_per_row(code_len),)
    code_len: int


def _as_sign_matrix(signs) -> np.ndarray:
    arr = np.asarray(signs)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D sign array, got ndim={arr.ndim}")
    plus = arr == 1
    minus = arr == -1
    if not np.logical_or(plus, minus).all():
        bad = arr[~np.logical_or(plus, minus)]
        raise ValueError(f"code entries must be -1 or +1, found {bad.flat[0]!r}")
    return np.where(plus, 1, -1).astype(np.int8)


def _pack_sign_matrix(signs: np.ndarray) -> np.ndarray:
    rows, code_len = signs.shape
    n_words = words_per_row(code_len)
    bits = np.zeros((rows, n_words * WORD_BITS), dtype=np.uint8)
    bits[:, :code_len] = signs == 1
    raw = np.packbits(bits, axis=1, bitorder="little")
    # Assemble words byte-by-byte so the layout is host-endianness independent.
    grouped = raw.reshape(rows, n_words, _WORD_BYTES).astype(np.uint64)
    shifts = (np.arange(_WORD_BYTES, dtype=np.uint64) * np.uint64(8))[None, None, :]
    return (grouped << shifts).sum(axis=2, dtype=np.uint64)


def _unpack_words(words: np.ndarray, code_len: int) -> np.ndarray:
    rows = words.shape[0]
    shifts = (np.arange(_WORD_BYTES, dtype=np.uint64) * np.uint64(8))[None, None, :]
    raw = ((words[:, :, None] >> shifts) & np.uint64(0xFF)).astype(np.uint8)
    bits = np.unpackbits(raw.reshape(rows, -1), axis=1, bitorder="little")
    return np.where(bits[:, :code_len].astype(bool), 1, -1).astype(np.int8)


def _pad_mask(code_len: int) -> np.uint64:
    """Bits of the final word that lie past code_len."""
    used = code_len % WORD_BITS
    if used == 0:
        return np.uint64(0)
    return np.uint64(~((1 << used) - 1) & 0xFFFFFFFFFFFFFFFF)


class CodeMatrix:
    """Immutable rows x code_len matrix over {-1, +1}, bit-packed row-major.

    Safe to share across threads once constructed; all accessors are
    read-only.
    """

    def __init__(self, words: np.ndarray, rows: int, code_len: int):
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if code_len < 1:
            raise ValueError("code_len must be >= 1")
        if words.shape != (rows, words_per_row(code_len)):
            raise ValueError(
                f"packed storage shape {words.shape} does not match "
                f"{rows} rows of {code_len} bits"
            )
        pad = _pad_mask(code_len)
        if rows and pad and (words[:, -1] & pad).any():
            raise ValueError("pad bits past code_len must be zero")
        words.flags.writeable = False
        self.words = words
        self.rows = rows
        self.code_len = code_len

    @classmethod
    def from_signs(cls, signs) -> "CodeMatrix":
        mat = _as_sign_matrix(signs)
        return cls(_pack_sign_matrix(mat), mat.shape[0], mat.shape[1])

    def to_signs(self) -> np.ndarray:
        """Unpack to an int8 matrix over {-1, +1}."""
        return _unpack_words(self.words, self.code_len)

    def row(self, i: int) -> PackedRow:
        return PackedRow(self.words[i], self.code_len)

    def __len__(self) -> int:
        return self.rows

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return (
            self.code_len == other.code_len
            and self.rows == other.rows
            and np.array_equal(self.words, other.words)
        )

    def __repr__(self) -> str:
        return f"CodeMatrix(rows={self.rows}, code_len={self.code_len})"


def pack_row(signs) -> PackedRow:
    """Pack a 1-D vector of +/-1 into words (set bit means +1)."""
    mat = _as_sign_matrix(signs)
    if mat.shape[0] != 1:
        raise ValueError("pack_row expects a single vector")
    return PackedRow(_pack_sign_matrix(mat)[0], mat.shape[1])


def unpack_row(row: PackedRow) -> np.ndarray:
    return _unpack_words(row.words[None, :], row.code_len)[0]


def _check_compatible(u: PackedRow, v: PackedRow) -> None:
    if u.code_len != v.code_len:
        raise ValueError(
            f"code length mismatch: {u.code_len} vs {v.code_len}"
        )


def hamming_distance(u: PackedRow, v: PackedRow) -> int:
    """Number of differing bit positions between two packed rows."""
    _check_compatible(u, v)
    return int(np.bitwise_count(u.words ^ v.words).sum())


def code_inner_product(u: PackedRow, v: PackedRow) -> int:
    """Inner product over the logical +/-1 values: code_len - 2 * distance."""
    _check_compatible(u, v)
    return u.code_len - 2 * hamming_distance(u, v)


def pairwise_hamming(
    queries: CodeMatrix, database: CodeMatrix, chunk: int = 64
) -> np.ndarray:
    """Distance matrix (queries.rows x database.rows) of Hamming distances.

    Chunked over query rows to bound the xor workspace at
    chunk * database.rows * words bytes.
    """
    if queries.code_len != database.code_len:
        raise ValueError(
            f"code length mismatch: {queries.code_len} vs {database.code_len}"
        )
    out = np.empty((queries.rows, database.rows), dtype=np.int64)
    for start in range(0, queries.rows, chunk):
        stop = min(start + chunk, queries.rows)
        xored = queries.words[start:stop, None, :] ^ database.words[None, :, :]
        out[start:stop] = np.bitwise_count(xored).sum(axis=2, dtype=np.int64)
    return out


def binarize(raw) -> np.ndarray:
    """Componentwise sign with sign(0) = +1; rejects NaN entries."""
    arr = np.asarray(raw, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("cannot binarize NaN entries")
    return np.where(arr >= 0.0, 1, -1).astype(np.int8)
