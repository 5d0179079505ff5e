"""
Depolarizing Pauli noise, syndromes and logical labels.

Every qubit independently picks I, X, Z or XZ with probabilities
(1 - p, p/3, p/3, p/3). Randomness comes from numpy generators keyed by
(seed, stream id), so any partition of the work over streams reproduces the
same samples.

Single-value types (PauliError, Syndrome, LogicalLabel) carry packed bits;
the batch helpers work on dense uint8 arrays of shape (batch, bits).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qec.code import ToricCode
from qec.gf2 import BitVector, GF2ShapeError, dense_mod2_product

# Pauli kinds as stored in sampled kind arrays
IDENTITY, PAULI_X, PAULI_Z, PAULI_XZ = 0, 1, 2, 3


class NoiseParameterError(ValueError):
    pass


def channel_count(dim: int) -> int:
    """Syndrome channels: the face-check blocks plus one vertex channel."""
    return (3 if dim == 3 else 1) + 1


def stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream_id]))


# ── value types ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class NoiseModel:
    p: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p <= 1.0) or math.isnan(self.p):
            raise NoiseParameterError(f"error rate must lie in [0, 1], got {self.p}")

    @property
    def pauli_probabilities(self) -> tuple[float, float, float, float]:
        """Probabilities of (I, X, Z, XZ) on one qubit."""
        return (1.0 - self.p, self.p / 3, self.p / 3, self.p / 3)

    def log_probability(self, weight: np.ndarray | int, n_qubits: int) -> np.ndarray:
        """log p(E) for errors of the given weight(s); -inf where impossible."""
        weight = np.asarray(weight, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            term_err = np.where(weight > 0, weight * np.log(self.p / 3), 0.0)
            idle = n_qubits - weight
            term_id = np.where(idle > 0, idle * np.log1p(-self.p), 0.0)
        return term_err + term_id


@dataclass(frozen=True)
class PauliError:
    """X part and Z part supports; a qubit in both carries XZ."""

    x_bits: BitVector
    z_bits: BitVector

    @classmethod
    def identity(cls, n_qubits: int) -> PauliError:
        zero = BitVector.zeros(n_qubits)
        return cls(zero, zero)

    @classmethod
    def from_arrays(cls, x: np.ndarray, z: np.ndarray) -> PauliError:
        return cls(BitVector.from_bits(np.asarray(x)), BitVector.from_bits(np.asarray(z)))

    @property
    def n_qubits(self) -> int:
        return self.x_bits.length

    def weight(self) -> int:
        return int(np.count_nonzero(self.x_bits.to_array() | self.z_bits.to_array()))

    def to_array(self) -> np.ndarray:
        """Concatenated [x | z] bits."""
        return np.concatenate([self.x_bits.to_array(), self.z_bits.to_array()])

    def __xor__(self, other: PauliError) -> PauliError:
        return PauliError(self.x_bits ^ other.x_bits, self.z_bits ^ other.z_bits)


@dataclass(frozen=True)
class ErrorBatch:
    x: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, i: int) -> PauliError:
        return PauliError.from_arrays(self.x[i], self.z[i])

    @classmethod
    def from_errors(cls, errors: list[PauliError]) -> ErrorBatch:
        return cls(
            np.stack([e.x_bits.to_array() for e in errors]),
            np.stack([e.z_bits.to_array() for e in errors]),
        )

    def weights(self) -> np.ndarray:
        return np.count_nonzero(self.x | self.z, axis=1)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.z], axis=1)


@dataclass(frozen=True)
class Syndrome:
    """Check outcomes ordered [face checks | vertex checks]."""

    bits: BitVector
    L: int
    dim: int = 3

    @classmethod
    def from_array(cls, bits: np.ndarray, L: int, dim: int = 3) -> Syndrome:
        return cls(BitVector.from_bits(np.asarray(bits, dtype=np.uint8)), L, dim)

    @classmethod
    def from_channels(cls, channels: np.ndarray, L: int, dim: int = 3) -> Syndrome:
        return cls.from_array(np.asarray(channels).reshape(-1), L, dim)

    @classmethod
    def zeros(cls, code: ToricCode) -> Syndrome:
        return cls(BitVector.zeros(code.n_checks), code.L, code.dim)

    def to_array(self) -> np.ndarray:
        return self.bits.to_array()

    def channels(self) -> np.ndarray:
        return to_channels(self, self.L)

    def any(self) -> bool:
        return self.bits.any()


@dataclass(frozen=True)
class LogicalLabel:
    """Label bits ordered (X_ab, X_or, [X_ap,] Z_ab, Z_or, [Z_ap]); index = sum bits[i] 2**i."""

    bits: tuple[bool, ...]

    @classmethod
    def from_index(cls, index: int, n_logicals: int = 6) -> LogicalLabel:
        if not 0 <= index < 2**n_logicals:
            raise ValueError(f"label index {index} out of range for {n_logicals} logicals")
        return cls(tuple(bool((index >> i) & 1) for i in range(n_logicals)))

    @property
    def index(self) -> int:
        return sum(1 << i for i, b in enumerate(self.bits) if b)

    def __xor__(self, other: LogicalLabel) -> LogicalLabel:
        return LogicalLabel(tuple(a != b for a, b in zip(self.bits, other.bits)))


# ── sampling ──────────────────────────────────────────────────────────────────

def sample_kinds(n_qubits: int, noise: NoiseModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Pauli kind per qubit (0=I, 1=X, 2=Z, 3=XZ), shape (size, n_qubits).

    One uniform draw per qubit: r < p selects an error and r * 3 / p picks
    which one.
    """
    r = rng.random((size, n_qubits))
    kinds = np.zeros((size, n_qubits), dtype=np.uint8)
    if noise.p > 0:
        hit = r < noise.p
        kinds[hit] = 1 + np.minimum((r[hit] * 3 / noise.p).astype(np.uint8), 2)
    return kinds


def sample_errors(code: ToricCode, noise: NoiseModel, rng: np.random.Generator, size: int) -> ErrorBatch:
    kinds = sample_kinds(code.n_qubits, noise, rng, size)
    return ErrorBatch(
        x=((kinds == PAULI_X) | (kinds == PAULI_XZ)).astype(np.uint8),
        z=((kinds == PAULI_Z) | (kinds == PAULI_XZ)).astype(np.uint8),
    )


def sample_error(code: ToricCode, noise: NoiseModel, rng: np.random.Generator) -> PauliError:
    return sample_errors(code, noise, rng, 1)[0]


# ── syndromes and labels ──────────────────────────────────────────────────────

def _check_error_size(code: ToricCode, n: int) -> None:
    if n != code.n_qubits:
        raise GF2ShapeError(f"error acts on {n} qubits, code has {code.n_qubits}")


def extract_syndromes(code: ToricCode, errors: ErrorBatch) -> np.ndarray:
    """(batch, n_checks) syndromes: [faces @ x ; vertices @ z] mod 2."""
    _check_error_size(code, errors.x.shape[1])
    face = dense_mod2_product(errors.x, code.dense_face_checks.T)
    vertex = dense_mod2_product(errors.z, code.dense_vertex_checks.T)
    return np.concatenate([face, vertex], axis=1)


def extract_syndrome(code: ToricCode, e: PauliError) -> Syndrome:
    _check_error_size(code, e.n_qubits)
    bits = extract_syndromes(code, ErrorBatch(e.x_bits.to_array()[None], e.z_bits.to_array()[None]))[0]
    return Syndrome.from_array(bits, code.L, code.dim)


def label_bits(code: ToricCode, stacked: np.ndarray) -> np.ndarray:
    """Label bits for stacked [x | z] error rows, shape (batch, n_logicals)."""
    return dense_mod2_product(stacked, code.label_matrix.T)


def label_indices(bits: np.ndarray) -> np.ndarray:
    return bits.astype(np.int64) @ (1 << np.arange(bits.shape[-1], dtype=np.int64))


def index_bits(indices: np.ndarray, n_logicals: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    return ((indices[..., None] >> np.arange(n_logicals)) & 1).astype(np.uint8)


def logical_labels(code: ToricCode, errors: ErrorBatch) -> np.ndarray:
    """Class index of each error in the batch."""
    _check_error_size(code, errors.x.shape[1])
    return label_indices(label_bits(code, errors.stacked()))


def logical_label(code: ToricCode, e: PauliError) -> LogicalLabel:
    _check_error_size(code, e.n_qubits)
    bits = label_bits(code, e.to_array()[None])[0]
    return LogicalLabel(tuple(bool(b) for b in bits))


# ── channel view ──────────────────────────────────────────────────────────────

def syndrome_channels(bits: np.ndarray, L: int, dim: int = 3) -> np.ndarray:
    """Reshape (..., n_checks) syndrome rows into (..., channels, L, ..., L)."""
    channels = channel_count(dim)
    if bits.shape[-1] != channels * L**dim:
        raise GF2ShapeError(f"syndrome of length {bits.shape[-1]} does not fit {channels} x {L}^{dim}")
    return bits.reshape(bits.shape[:-1] + (channels,) + (L,) * dim)


def to_channels(s: Syndrome, L: int) -> np.ndarray:
    return syndrome_channels(s.to_array(), L, s.dim)
