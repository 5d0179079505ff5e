import logging

import numpy as np
import torch

from decoders.base import BatchDecode, DecodeResult, Decoder, DecoderCompatibilityError
from network.model import PooledDecoder
from qec.code import ToricCode
from qec.noise import Syndrome

logger = logging.getLogger(__name__)


class NeuralDecoder(Decoder):
    """Argmax of a PooledDecoder's class distribution.

    The network is fully convolutional, so unless ``rigid`` is set it decodes
    any lattice size of its dimension by rebuilding the pooling head.
    """

    supports_any_lattice = True

    def __init__(self, model: PooledDecoder, rigid: bool = False, batch_size: int = 1024):
        super().__init__(model.code)
        self.model = model.eval()
        self.rigid = rigid
        self.batch_size = batch_size
        self.supports_any_lattice = not rigid
        self.name = f"neural-{model.spec.head}"
        self._by_lattice: dict[int, NeuralDecoder] = {model.code.L: self}

    def for_code(self, code: ToricCode) -> "NeuralDecoder":
        self.check_compatible(code)
        if code.L not in self._by_lattice:
            self._by_lattice[code.L] = NeuralDecoder(self.model.with_code(code), self.rigid, self.batch_size)
        return self._by_lattice[code.L]

    @torch.no_grad()
    def decode_batch(self, syndromes: np.ndarray) -> BatchDecode:
        if syndromes.shape[-1] != self.code.n_checks:
            raise DecoderCompatibilityError(
                f"syndromes of length {syndromes.shape[-1]} do not fit L={self.code.L} ({self.code.n_checks} checks)"
            )
        chunks = []
        for start in range(0, len(syndromes), self.batch_size):
            batch = torch.from_numpy(np.ascontiguousarray(syndromes[start: start + self.batch_size], dtype=np.float32))
            chunks.append(self.model(batch).numpy())
        if chunks:
            probs = np.concatenate(chunks)
        else:
            probs = np.zeros((0, self.code.n_classes), dtype=np.float32)
        return BatchDecode(labels=probs.argmax(axis=1).astype(np.int64), distributions=probs)


def decode_neural(model: PooledDecoder, s: Syndrome, rigid: bool = False) -> DecodeResult:
    return NeuralDecoder(model, rigid=rigid).decode(s)
