"""
Lattice translations and the syndrome-conditioned logical flips they induce.

A translation g moves qubit (a, r) to (a, r + g) and check (b, r) to
(b, r + g). Translating an error can change its logical class, and by how
much depends only on the syndrome:

    label(g e) = label(e) ^ delta(g, syndrome(e))

delta is linear in the syndrome, delta(g, s) = W_g s mod 2. On achievable
syndromes (s = H e) it satisfies the cocycle law
delta(g + h, s) = delta(g, h s) ^ delta(h, s). Outside the image of H the
matrices depend on the order the unit steps were composed in, so only
achievable syndromes carry the equivariance contract.

W_g is read off a label-free destabilizer D (a linear syndrome -> error map
with label(D s) = 0): delta(g, s) = label(D(g s) ^ g(D s)) = label(g(D s)).
"""
from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from config import settings
from qec.code import ToricCode, build_toric
from qec.gf2 import BitMatrix, dense_mod2_product, right_pseudo_inverse
from qec.noise import (
    ErrorBatch,
    LogicalLabel,
    PauliError,
    Syndrome,
    channel_count,
    extract_syndromes,
    label_bits,
)

logger = logging.getLogger(__name__)


class EquivarianceError(ValueError):
    pass


# ── translation group ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Translation:
    shift: tuple[int, ...]
    L: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "shift", tuple(int(s) % self.L for s in self.shift))

    @classmethod
    def identity(cls, L: int, dim: int = 3) -> Translation:
        return cls((0,) * dim, L)

    @classmethod
    def unit(cls, axis: int, L: int, dim: int = 3) -> Translation:
        return cls(tuple(int(a == axis) for a in range(dim)), L)

    @property
    def dim(self) -> int:
        return len(self.shift)

    @property
    def is_identity(self) -> bool:
        return not any(self.shift)

    def compose(self, other: Translation) -> Translation:
        self._check_compatible(other)
        return Translation(tuple(a + b for a, b in zip(self.shift, other.shift)), self.L)

    def inverse(self) -> Translation:
        return Translation(tuple(-s for s in self.shift), self.L)

    def _check_compatible(self, other: Translation) -> None:
        if self.L != other.L or self.dim != other.dim:
            raise EquivarianceError(f"translations on different lattices: {self} vs {other}")


def all_translations(L: int, dim: int = 3) -> list[Translation]:
    """Every group element, ordered like the flattened lattice positions."""
    return [Translation(s, L) for s in itertools.product(range(L), repeat=dim)]


def _roll(array: np.ndarray, g: Translation) -> np.ndarray:
    axes = tuple(range(array.ndim - g.dim, array.ndim))
    return np.roll(array, g.shift, axis=axes)


def translate_qubits(g: Translation, bits: np.ndarray) -> np.ndarray:
    """Translate (..., dim * L**dim) qubit rows."""
    lead = bits.shape[:-1]
    view = bits.reshape(lead + (g.dim,) + (g.L,) * g.dim)
    return _roll(view, g).reshape(bits.shape)


def translate_checks(g: Translation, bits: np.ndarray) -> np.ndarray:
    """Translate (..., n_checks) syndrome rows, channel by channel."""
    lead = bits.shape[:-1]
    view = bits.reshape(lead + (channel_count(g.dim),) + (g.L,) * g.dim)
    return _roll(view, g).reshape(bits.shape)


def translate_error(g: Translation, e: PauliError) -> PauliError:
    return PauliError.from_arrays(
        translate_qubits(g, e.x_bits.to_array()),
        translate_qubits(g, e.z_bits.to_array()),
    )


def translate_errors(g: Translation, errors: ErrorBatch) -> ErrorBatch:
    return ErrorBatch(translate_qubits(g, errors.x), translate_qubits(g, errors.z))


def translate_syndrome(g: Translation, s: Syndrome) -> Syndrome:
    if (s.L, s.dim) != (g.L, g.dim):
        raise EquivarianceError(f"translation on L={g.L}, dim={g.dim} applied to syndrome of L={s.L}, dim={s.dim}")
    return Syndrome.from_array(translate_checks(g, s.to_array()), s.L, s.dim)


# ── destabilizer ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Destabilizer:
    """Linear map from syndromes to canonical errors reproducing them.

    Face-syndrome bits map to the x part, vertex-syndrome bits to the z part.
    Every image commutes with the canonical logicals.
    """

    x_map: BitMatrix  # n_qubits x n_face_checks
    z_map: BitMatrix  # n_qubits x n_vertex_checks

    @functools.cached_property
    def dense(self) -> np.ndarray:
        """(2 n_qubits, n_checks) block map [[x_map, 0], [0, z_map]]."""
        x, z = self.x_map.to_array(), self.z_map.to_array()
        return np.block([
            [x, np.zeros((x.shape[0], z.shape[1]), dtype=np.uint8)],
            [np.zeros((z.shape[0], x.shape[1]), dtype=np.uint8), z],
        ])

    def apply_array(self, bits: np.ndarray) -> ErrorBatch:
        stacked = dense_mod2_product(np.atleast_2d(bits), self.dense.T)
        n = self.x_map.rows
        return ErrorBatch(stacked[:, :n], stacked[:, n:])

    def apply(self, s: Syndrome) -> PauliError:
        return self.apply_array(s.to_array())[0]


def achievable(code: ToricCode, bits: np.ndarray, destabilizer: Destabilizer | None = None) -> np.ndarray:
    """Boolean mask over (..., n_checks) rows: True where the row is H e for some error e."""
    destabilizer = destabilizer or build_destabilizer(code)
    rows = np.asarray(bits, dtype=np.uint8)
    flat = rows.reshape(-1, code.n_checks)
    reproduced = extract_syndromes(code, destabilizer.apply_array(flat))
    return np.all(reproduced == flat, axis=1).reshape(rows.shape[:-1])


def build_destabilizer(code: ToricCode) -> Destabilizer:
    x_map = right_pseudo_inverse(code.face_checks).to_array()
    z_map = right_pseudo_inverse(code.vertex_checks).to_array()

    # Cancel any logical content: an image that anticommutes with Z_t gets X_t
    # added (and vice versa). The pairing matrix is the identity.
    x_log = code.logicals.x_matrix()
    z_log = code.logicals.z_matrix()
    x_map ^= dense_mod2_product(x_log.T, dense_mod2_product(z_log, x_map))
    z_map ^= dense_mod2_product(z_log.T, dense_mod2_product(x_log, z_map))

    return Destabilizer(BitMatrix.from_array(x_map), BitMatrix.from_array(z_map))


# ── flip functionals ──────────────────────────────────────────────────────────

class FlipFunctional:
    """The matrices W_g with delta(g, s) = W_g s mod 2.

    Generator matrices (unit shifts) are computed from the destabilizer; all
    others follow from the cocycle law. When L is at most
    ``settings.equivariance_cache_max_lattice`` the full table is cached.
    """

    def __init__(self, code: ToricCode, destabilizer: Destabilizer | None = None):
        self.code = code
        self.destabilizer = destabilizer or build_destabilizer(code)
        self._generators = [
            self._direct(Translation.unit(a, code.L, code.dim)) for a in range(code.dim)
        ]
        self._table: np.ndarray | None = None

    @property
    def cached(self) -> bool:
        return self.code.L <= settings.equivariance_cache_max_lattice

    def _direct(self, g: Translation) -> np.ndarray:
        # column j of D is the canonical error for syndrome bit j
        columns = self.destabilizer.dense.T
        n = self.code.n_qubits
        moved = np.concatenate(
            [translate_qubits(g, columns[:, :n]), translate_qubits(g, columns[:, n:])],
            axis=1,
        )
        return label_bits(self.code, moved).T

    def _step(self, w: np.ndarray, done: Translation, axis: int) -> np.ndarray:
        # W_{e_a + h} = W_{e_a} S_h ^ W_h, and W S_h is W translated by -h
        return translate_checks(done.inverse(), self._generators[axis]) ^ w

    def _compose(self, g: Translation) -> np.ndarray:
        w = np.zeros_like(self._generators[0])
        done = Translation.identity(self.code.L, self.code.dim)
        for axis, steps in enumerate(g.shift):
            unit = Translation.unit(axis, self.code.L, self.code.dim)
            for _ in range(steps):
                w = self._step(w, done, axis)
                done = done.compose(unit)
        return w

    def table(self) -> np.ndarray:
        """(|G|, n_logicals, n_checks) stack of W_g in lattice-position order."""
        if self._table is not None:
            return self._table
        group = all_translations(self.code.L, self.code.dim)
        table = np.zeros((len(group),) + self._generators[0].shape, dtype=np.uint8)
        index = {g.shift: i for i, g in enumerate(group)}
        for i, g in enumerate(group):
            if g.is_identity:
                continue
            axis = max(a for a, s in enumerate(g.shift) if s)
            prev = Translation(tuple(s - (a == axis) for a, s in enumerate(g.shift)), g.L)
            table[i] = self._step(table[index[prev.shift]], prev, axis)
        if self.cached:
            self._table = table
            logger.info("Cached %d flip matrices for L=%d, dim=%d", len(group), self.code.L, self.code.dim)
        return table

    def matrix(self, g: Translation) -> np.ndarray:
        if (g.L, g.dim) != (self.code.L, self.code.dim):
            raise EquivarianceError(f"translation {g.shift} (L={g.L}) does not act on this code (L={self.code.L})")
        if self.cached:
            return self.table()[int(np.ravel_multi_index(g.shift, (g.L,) * g.dim))]
        return self._compose(g)

    def delta(self, g: Translation, bits: np.ndarray) -> np.ndarray:
        """delta bits for (..., n_checks) syndrome rows."""
        return dense_mod2_product(bits, self.matrix(g).T)

    def position_flips(self) -> np.ndarray:
        """Per-position flip matrices C_g = W_g S_{-g}, shape (|G|, n_logicals, n_checks).

        Pooling position g with flip C_g s (= delta(g, g^-1 s)) makes the pooled
        distribution transform by delta under lattice translations.
        """
        group = all_translations(self.code.L, self.code.dim)
        table = self.table()
        return np.stack([translate_checks(g, table[i]) for i, g in enumerate(group)])


@functools.lru_cache(maxsize=8)
def flip_functional(code: ToricCode) -> FlipFunctional:
    return FlipFunctional(code)


def delta_bits(g: Translation, s: Syndrome, functional: FlipFunctional | None = None) -> LogicalLabel:
    functional = functional or flip_functional(build_toric(s.L, s.dim))
    bits = functional.delta(g, s.to_array()[None])[0]
    return LogicalLabel(tuple(bool(b) for b in bits))


# ── class tensors ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ClassTensor:
    """Scores over logical classes viewed with one binary axis per logical.

    ``values[b_0, ..., b_{k-1}]`` is the score of class sum(b_a 2**a).
    """

    values: np.ndarray

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> ClassTensor:
        flat = np.asarray(flat)
        k = int(flat.size).bit_length() - 1
        if flat.size != 2**k:
            raise EquivarianceError(f"class vector of length {flat.size} is not a power of two")
        return cls(flat.reshape((2,) * k).transpose(tuple(reversed(range(k)))))

    @property
    def n_axes(self) -> int:
        return self.values.ndim

    def flat(self) -> np.ndarray:
        k = self.n_axes
        return self.values.transpose(tuple(reversed(range(k)))).reshape(-1)


def apply_flip(t: ClassTensor, bits: Sequence[int] | LogicalLabel) -> ClassTensor:
    """Swap the two slices of every axis whose bit is set."""
    if isinstance(bits, LogicalLabel):
        bits = bits.bits
    if len(bits) != t.n_axes:
        raise EquivarianceError(f"{len(bits)} flip bits for a tensor with {t.n_axes} axes")
    axes = tuple(a for a, b in enumerate(bits) if b)
    return ClassTensor(np.flip(t.values, axis=axes) if axes else t.values)
