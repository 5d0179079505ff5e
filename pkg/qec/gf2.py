"""
Bit-packed linear algebra over GF(2).

Vectors and matrices keep their bits packed eight to a byte (numpy uint8
words, most significant bit first). The packing is internal: callers only
ever address single bits or convert to/from dense 0/1 arrays.

Row reduction XORs whole packed rows at once. Products are computed on
dense float32 copies (exact for inner dimensions below 2**24) and reduced
mod 2, which lets numpy hand the work to BLAS.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_MAX_EXTENT = 2**31 - 1


class GF2ShapeError(ValueError):
    """Operand dimensions do not line up."""


class GF2SizeError(ValueError):
    """Result would exceed the addressable row/column range."""


# ── packing helpers ───────────────────────────────────────────────────────────

def _as_bits(values) -> np.ndarray:
    return np.asarray(values, dtype=np.uint8) & 1


def _pack(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits, axis=-1)


def _bit_column(words: np.ndarray, col: int) -> np.ndarray:
    return (words[:, col >> 3] >> (7 - (col & 7))) & 1


def dense_mod2_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of dense 0/1 arrays reduced mod 2 (uint8 result)."""
    if a.shape[-1] != b.shape[0]:
        raise GF2ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    if a.shape[-1] >= 2**24:
        raise GF2SizeError(f"inner dimension {a.shape[-1]} too large for exact float32 products")
    prod = np.asarray(a, dtype=np.float32) @ np.asarray(b, dtype=np.float32)
    return (np.rint(prod).astype(np.int64) & 1).astype(np.uint8)


# ── BitVector ─────────────────────────────────────────────────────────────────

class BitVector:
    """Immutable packed bit string of fixed length."""

    __slots__ = ("length", "_words")

    def __init__(self, words: np.ndarray, length: int):
        words = np.array(words, dtype=np.uint8).reshape(-1)
        if words.size != (length + 7) // 8:
            raise GF2ShapeError(f"{words.size} words cannot hold exactly {length} bits")
        tail = length & 7
        if tail and words.size:
            # bits past the end stay zero
            words[-1] &= (0xFF << (8 - tail)) & 0xFF
        words.flags.writeable = False
        self.length = length
        self._words = words

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> BitVector:
        arr = _as_bits(np.fromiter(bits, dtype=np.uint8) if not isinstance(bits, np.ndarray) else bits)
        if arr.ndim != 1:
            raise GF2ShapeError(f"expected a 1-D bit array, got shape {arr.shape}")
        return cls(_pack(arr), arr.size)

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(np.zeros((length + 7) // 8, dtype=np.uint8), length)

    @classmethod
    def from_support(cls, length: int, support: Iterable[int]) -> BitVector:
        arr = np.zeros(length, dtype=np.uint8)
        arr[list(support)] = 1
        return cls.from_bits(arr)

    @property
    def words(self) -> np.ndarray:
        return self._words

    def to_array(self) -> np.ndarray:
        return np.unpackbits(self._words, count=self.length)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.to_array())

    def weight(self) -> int:
        return int(np.unpackbits(self._words).sum())

    def dot(self, other: BitVector) -> int:
        """Parity of the overlap of the two supports."""
        self._check_same_length(other)
        return int(np.unpackbits(self._words & other._words).sum() & 1)

    def any(self) -> bool:
        return bool(self._words.any())

    def _check_same_length(self, other: BitVector) -> None:
        if self.length != other.length:
            raise GF2ShapeError(f"length mismatch: {self.length} vs {other.length}")

    def __xor__(self, other: BitVector) -> BitVector:
        self._check_same_length(other)
        return BitVector(self._words ^ other._words, self.length)

    def __and__(self, other: BitVector) -> BitVector:
        self._check_same_length(other)
        return BitVector(self._words & other._words, self.length)

    def __getitem__(self, index: int) -> int:
        if not -self.length <= index < self.length:
            raise IndexError(f"bit {index} out of range for length {self.length}")
        index %= self.length
        return int((self._words[index >> 3] >> (7 - (index & 7))) & 1)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self._words, other._words))

    def __hash__(self) -> int:
        return hash((self.length, self._words.tobytes()))

    def __repr__(self) -> str:
        bits = "".join(str(b) for b in self.to_array()[:64])
        more = "..." if self.length > 64 else ""
        return f"BitVector({self.length}, {bits}{more})"


# ── BitMatrix ─────────────────────────────────────────────────────────────────

class BitMatrix:
    """Immutable row-major packed binary matrix."""

    __slots__ = ("rows", "cols", "_words")

    def __init__(self, words: np.ndarray, rows: int, cols: int):
        words = np.array(words, dtype=np.uint8).reshape(rows, (cols + 7) // 8)
        tail = cols & 7
        if tail and words.shape[1]:
            words[:, -1] &= (0xFF << (8 - tail)) & 0xFF
        words.flags.writeable = False
        self.rows = rows
        self.cols = cols
        self._words = words

    @classmethod
    def from_array(cls, array) -> BitMatrix:
        arr = _as_bits(array)
        if arr.ndim != 2:
            raise GF2ShapeError(f"expected a 2-D bit array, got shape {arr.shape}")
        return cls(_pack(arr), *arr.shape)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BitMatrix:
        return cls(np.zeros((rows, (cols + 7) // 8), dtype=np.uint8), rows, cols)

    @classmethod
    def identity(cls, n: int) -> BitMatrix:
        return cls.from_array(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector]) -> BitMatrix:
        if not rows:
            raise GF2ShapeError("at least one row is needed to infer the column count")
        cols = rows[0].length
        if any(r.length != cols for r in rows):
            raise GF2ShapeError("rows have different lengths")
        return cls(np.stack([r.words for r in rows]), len(rows), cols)

    @classmethod
    def block(cls, grid: Sequence[Sequence[BitMatrix | None]]) -> BitMatrix:
        """Assemble a block matrix; ``None`` entries are zero blocks."""
        heights = [next(b.rows for b in row if b is not None) for row in grid]
        widths = [next(row[j].cols for row in grid if row[j] is not None) for j in range(len(grid[0]))]
        dense = np.block([
            [
                b.to_array() if b is not None else np.zeros((h, w), dtype=np.uint8)
                for b, w in zip(row, widths)
            ]
            for row, h in zip(grid, heights)
        ])
        return cls.from_array(dense)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def words(self) -> np.ndarray:
        return self._words

    @property
    def T(self) -> BitMatrix:
        return BitMatrix.from_array(self.to_array().T)

    def to_array(self) -> np.ndarray:
        return np.unpackbits(self._words, axis=1, count=self.cols)

    def row(self, i: int) -> BitVector:
        return BitVector(self._words[i], self.cols)

    def row_weights(self) -> np.ndarray:
        return self.to_array().sum(axis=1)

    def with_flipped(self, i: int, j: int) -> BitMatrix:
        dense = self.to_array()
        dense[i, j] ^= 1
        return BitMatrix.from_array(dense)

    def any(self) -> bool:
        return bool(self._words.any())

    def __getitem__(self, index: tuple[int, int]) -> int:
        i, j = index
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"entry ({i}, {j}) out of range for shape {self.shape}")
        return int((self._words[i, j >> 3] >> (7 - (j & 7))) & 1)

    def __xor__(self, other: BitMatrix) -> BitMatrix:
        if self.shape != other.shape:
            raise GF2ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
        return BitMatrix(self._words ^ other._words, self.rows, self.cols)

    def __matmul__(self, other):
        if isinstance(other, BitVector):
            return matvec(self, other)
        if isinstance(other, BitMatrix):
            return matmul(self, other)
        return NotImplemented

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._words, other._words))

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols}, ones={int(self.row_weights().sum())})"


# ── products ──────────────────────────────────────────────────────────────────

def kron(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    rows, cols = a.rows * b.rows, a.cols * b.cols
    if rows > _MAX_EXTENT or cols > _MAX_EXTENT:
        raise GF2SizeError(f"kronecker product of {a.shape} and {b.shape} is too large")
    return BitMatrix.from_array(np.kron(a.to_array(), b.to_array()))


def matmul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        raise GF2ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return BitMatrix.from_array(dense_mod2_product(a.to_array(), b.to_array()))


def matvec(a: BitMatrix, v: BitVector) -> BitVector:
    if a.cols != v.length:
        raise GF2ShapeError(f"cannot multiply {a.shape} by a vector of length {v.length}")
    return BitVector.from_bits(dense_mod2_product(a.to_array(), v.to_array()))


# ── elimination ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RowReduction:
    """Reduced row echelon form with the row operations that produced it.

    ``transform @ original == reduced`` and ``pivots[k]`` is the pivot column
    of row ``k``.
    """

    reduced: BitMatrix
    pivots: tuple[int, ...]
    transform: BitMatrix

    @property
    def rank(self) -> int:
        return len(self.pivots)


def _eliminate(words: np.ndarray, n_pivot_cols: int) -> tuple[np.ndarray, list[int]]:
    """Gauss-Jordan elimination on packed rows.

    Pivot is the first row (lowest index) at or below the current one with the
    column bit set. Only the first ``n_pivot_cols`` columns are pivot
    candidates; row operations act on the full width.
    """
    words = words.copy()
    m = words.shape[0]
    pivots: list[int] = []
    r = 0
    for col in range(n_pivot_cols):
        if r == m:
            break
        below = np.flatnonzero(_bit_column(words[r:], col))
        if below.size == 0:
            continue
        p = r + int(below[0])
        if p != r:
            words[[r, p]] = words[[p, r]]
        hits = np.flatnonzero(_bit_column(words, col))
        hits = hits[hits != r]
        if hits.size:
            words[hits] ^= words[r]
        pivots.append(col)
        r += 1
    return words, pivots


def row_reduce(h: BitMatrix) -> RowReduction:
    augmented = np.concatenate([h.to_array(), np.eye(h.rows, dtype=np.uint8)], axis=1)
    words, pivots = _eliminate(_pack(augmented), h.cols)
    dense = np.unpackbits(words, axis=1, count=h.cols + h.rows)
    return RowReduction(
        reduced=BitMatrix.from_array(dense[:, : h.cols]),
        pivots=tuple(pivots),
        transform=BitMatrix.from_array(dense[:, h.cols:]),
    )


def rank(h: BitMatrix) -> int:
    _, pivots = _eliminate(h.words, h.cols)
    return len(pivots)


def right_pseudo_inverse(h: BitMatrix) -> BitMatrix:
    """Return D (cols x rows) with h @ D @ s == s for every s in the image of h.

    With E the accumulated row operations (E h = R in reduced form) the pivot
    rows of E are written to the pivot columns' rows of D. For s = h e the
    trailing entries of E s vanish, so R (D s) = E s and therefore h D s = s.
    Inputs outside the image of h have no preimage; the identity then fails,
    which is how callers detect them.
    """
    reduction = row_reduce(h)
    transform = reduction.transform.to_array()
    d = np.zeros((h.cols, h.rows), dtype=np.uint8)
    for k, col in enumerate(reduction.pivots):
        d[col] = transform[k]
    return BitMatrix.from_array(d)
