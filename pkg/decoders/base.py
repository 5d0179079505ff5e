import time
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from qec.code import ToricCode, build_toric
from qec.noise import LogicalLabel, Syndrome


class DecoderCompatibilityError(ValueError):
    pass


@dataclass
class DecodeResult:
    label: LogicalLabel | None
    distribution: np.ndarray | None = None
    seconds: float = 0.0


@dataclass
class BatchDecode:
    """labels[i] is a class index, or -1 when the decoder found no candidate."""

    labels: np.ndarray
    distributions: np.ndarray | None = None


class Decoder(ABC):
    """Abstract base for all decoders of one code."""

    name: str = ""
    supports_any_lattice: bool = False

    def __init__(self, code: ToricCode):
        self.code = code

    @abstractmethod
    def decode_batch(self, syndromes: np.ndarray) -> BatchDecode:
        """Decode (batch, n_checks) uint8 syndrome rows."""
        ...

    def check_compatible(self, code: ToricCode) -> None:
        if code.dim != self.code.dim:
            raise DecoderCompatibilityError(
                f"{self.name} decoder built for a {self.code.dim}D code cannot decode a {code.dim}D code"
            )
        if code.L != self.code.L and not self.supports_any_lattice:
            raise DecoderCompatibilityError(
                f"{self.name} decoder built for L={self.code.L} cannot decode L={code.L}"
            )

    def for_code(self, code: ToricCode) -> "Decoder":
        """This decoder, or an equivalent one bound to ``code``."""
        self.check_compatible(code)
        return self

    def decode(self, s: Syndrome) -> DecodeResult:
        decoder = self.for_code(build_toric(s.L, s.dim))
        started = time.perf_counter()
        batch = decoder.decode_batch(s.to_array()[None])
        seconds = time.perf_counter() - started
        index = int(batch.labels[0])
        label = None if index < 0 else LogicalLabel.from_index(index, self.code.n_logicals)
        distribution = None if batch.distributions is None else batch.distributions[0]
        return DecodeResult(label=label, distribution=distribution, seconds=seconds)


class ConstantDecoder(Decoder):
    """Always answers the same class; the baseline every decoder must beat."""

    name = "constant"
    supports_any_lattice = True

    def __init__(self, code: ToricCode, label: int = 0):
        super().__init__(code)
        self.label = label

    def decode_batch(self, syndromes: np.ndarray) -> BatchDecode:
        return BatchDecode(labels=np.full(len(syndromes), self.label, dtype=np.int64))
