"""Dump sampled (syndrome, label) pairs as CSV for offline inspection."""
import csv
import logging
from pathlib import Path

import numpy as np

from harness.metrics import evaluation_chunks
from qec.code import ToricCode

logger = logging.getLogger(__name__)

DATASET_FIELDS = ("seed", "stream", "sample-idx", "p", "label-index", "syndrome-bits")


def syndrome_hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def write_dataset(path: str | Path, code: ToricCode, p: float, n_samples: int, seed: int) -> Path:
    """Rows use the evaluation streams, so they match what eval_accuracy decodes for the same seed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DATASET_FIELDS)
        for chunk in evaluation_chunks(code, p, n_samples, seed):
            for i, (bits, label) in enumerate(zip(chunk.syndromes, chunk.labels)):
                writer.writerow((seed, chunk.stream_id, i, p, int(label), syndrome_hex(bits)))
    logger.info("Wrote %d samples for L=%d p=%.4f to %s", n_samples, code.L, p, path)
    return path
