"""
Maximum-likelihood decoding by enumerating low-weight errors.

Under depolarizing noise the probability of an error depends on its weight
only, so candidates are tabulated once per (code, w_max) as counts indexed by
(syndrome, weight, class). Coset probabilities for any p then follow from

    P(class c, syndrome s) = sum_w counts[s, w, c] (p/3)**w (1-p)**(n-w).

The exhaustive decoder is the same table with w_max = n, which is only
enumerable for the 2D L=2 code (4**8 Pauli strings).
"""
from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import comb
from scipy.stats import binom

from config import settings
from decoders.base import BatchDecode, DecodeResult, Decoder
from qec.code import ToricCode
from qec.noise import ErrorBatch, NoiseModel, Syndrome, extract_syndromes, logical_labels

logger = logging.getLogger(__name__)

DEFAULT_W_MAX = 3


class MLDSizeError(ValueError):
    pass


def enumeration_size(n_qubits: int, w_max: int) -> int:
    return sum(int(comb(n_qubits, w, exact=True)) * 3**w for w in range(w_max + 1))


def _errors_of_weight(n_qubits: int, w: int) -> ErrorBatch:
    n_supports = int(comb(n_qubits, w, exact=True))
    supports = np.array(list(itertools.combinations(range(n_qubits), w)), dtype=np.int64).reshape(n_supports, w)
    kinds = np.array(list(itertools.product((1, 2, 3), repeat=w)), dtype=np.uint8).reshape(3**w, w)
    rows = len(supports) * len(kinds)
    x = np.zeros((rows, n_qubits), dtype=np.uint8)
    z = np.zeros((rows, n_qubits), dtype=np.uint8)
    if w:
        row_index = np.repeat(np.arange(rows), w)
        qubits = np.repeat(supports, len(kinds), axis=0).reshape(-1)
        kind = np.tile(kinds, (len(supports), 1)).reshape(-1)
        x[row_index, qubits] = kind & 1
        z[row_index, qubits] = kind >> 1
    return ErrorBatch(x, z)


@dataclass(frozen=True)
class CandidateTable:
    """Error counts per (syndrome, weight, class) for all errors of weight <= w_max."""

    code: ToricCode
    w_max: int
    keys: dict[bytes, int]
    counts: np.ndarray  # (n_syndromes, w_max + 1, n_classes)

    def lookup(self, syndromes: np.ndarray) -> np.ndarray:
        """Row of each syndrome in ``counts``, -1 when no candidate produces it."""
        packed = np.packbits(np.asarray(syndromes, dtype=np.uint8), axis=1)
        return np.array([self.keys.get(row.tobytes(), -1) for row in packed], dtype=np.int64)


@functools.lru_cache(maxsize=8)
def candidate_table(code: ToricCode, w_max: int) -> CandidateTable:
    size = enumeration_size(code.n_qubits, w_max)
    if size > settings.mld_budget:
        raise MLDSizeError(
            f"enumerating weight <= {w_max} on {code.n_qubits} qubits needs {size} candidates "
            f"(budget {settings.mld_budget})"
        )

    packed_rows, weights, labels = [], [], []
    for w in range(w_max + 1):
        errors = _errors_of_weight(code.n_qubits, w)
        packed_rows.append(np.packbits(extract_syndromes(code, errors), axis=1))
        labels.append(logical_labels(code, errors))
        weights.append(np.full(len(errors), w, dtype=np.int64))

    unique, inverse = np.unique(np.concatenate(packed_rows), axis=0, return_inverse=True)
    counts = np.zeros((len(unique), w_max + 1, code.n_classes), dtype=np.int64)
    np.add.at(counts, (inverse.reshape(-1), np.concatenate(weights), np.concatenate(labels)), 1)
    logger.info(
        "Enumerated %d errors of weight <= %d on L=%d dim=%d: %d distinct syndromes",
        size, w_max, code.L, code.dim, len(unique),
    )
    return CandidateTable(code, w_max, {row.tobytes(): i for i, row in enumerate(unique)}, counts)


class MLDDecoder(Decoder):
    """Most probable logical class among enumerated errors matching the syndrome.

    With ``early_stop`` the weights are accumulated in increasing order and a
    syndrome is settled once the lead of the best class exceeds the total
    probability of all heavier errors. Ties go to the lowest class index.
    """

    def __init__(self, code: ToricCode, p: float, w_max: int = DEFAULT_W_MAX, early_stop: bool = True):
        super().__init__(code)
        self.noise = NoiseModel(p)
        self.w_max = min(w_max, code.n_qubits)
        self.early_stop = early_stop
        self.name = f"mld-w{self.w_max}"
        self.table = candidate_table(code, self.w_max)
        w = np.arange(self.w_max + 1)
        self._weight_probs = np.exp(self.noise.log_probability(w, code.n_qubits))
        # upper bound on the mass of every error heavier than w
        self._tails = binom.sf(w, code.n_qubits, p)

    def coset_probabilities(self, syndromes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rows = self.table.lookup(syndromes)
        found = rows >= 0
        probs = np.zeros((len(rows), self.code.n_classes))
        counts = self.table.counts[rows[found]]
        if not self.early_stop:
            probs[found] = np.einsum("bwc,w->bc", counts, self._weight_probs)
            return probs, found

        acc = np.zeros((len(counts), self.code.n_classes))
        settled = np.zeros(len(counts), dtype=bool)
        result = np.zeros_like(acc)
        for w in range(self.w_max + 1):
            acc += counts[:, w, :] * self._weight_probs[w]
            top = np.sort(acc, axis=1)[:, -2:]
            done = ~settled & ((top[:, 1] - top[:, 0] > self._tails[w]) | (w == self.w_max))
            result[done] = acc[done]
            settled |= done
            if settled.all():
                break
        probs[found] = result
        return probs, found

    def decode_batch(self, syndromes: np.ndarray) -> BatchDecode:
        probs, found = self.coset_probabilities(syndromes)
        labels = np.where(found, probs.argmax(axis=1), -1).astype(np.int64)
        missing = int((~found).sum())
        if missing:
            logger.warning("%s: no candidate of weight <= %d for %d syndrome(s)", self.name, self.w_max, missing)
        return BatchDecode(labels=labels, distributions=probs)


def exhaustive_decoder(code: ToricCode, p: float) -> MLDDecoder:
    if (code.dim, code.L) != (2, 2):
        raise MLDSizeError(
            f"exhaustive enumeration supports the 2D L=2 code only, got L={code.L} dim={code.dim}"
        )
    decoder = MLDDecoder(code, p, w_max=code.n_qubits, early_stop=False)
    decoder.name = "mld-exhaustive"
    return decoder


def decode_mld_exhaustive(code: ToricCode, s: Syndrome, p: float) -> DecodeResult:
    return exhaustive_decoder(code, p).decode(s)


def decode_mld_truncated(code: ToricCode, s: Syndrome, p: float, w_max: int = DEFAULT_W_MAX) -> DecodeResult:
    return MLDDecoder(code, p, w_max).decode(s)

