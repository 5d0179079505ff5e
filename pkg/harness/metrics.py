"""
Accuracy evaluation, runtime measurement and the metrics CSV.

Evaluation samples come in chunks of ``settings.eval_chunk_size``; chunk i is
drawn from stream (seed, i), so every decoder evaluated with the same seed sees
the same errors, and a thread pool can decode chunks in any order while the
results are still merged in stream order.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterator

import numpy as np

from config import settings
from decoders.base import Decoder
from qec.code import ToricCode
from qec.noise import NoiseModel, Syndrome, extract_syndromes, logical_labels, sample_errors, stream

logger = logging.getLogger(__name__)

LOSS_EPS = 1e-9
THROUGHPUT_TARGET = 1_000.0  # batched decodes per second


class HarnessError(ValueError):
    pass


@dataclass
class MetricsRow:
    decoder: str
    L: int
    p: float
    p_train: float | None
    samples: int
    accuracy: float
    loss: float | None
    seconds_per_decode: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise HarnessError(f"accuracy {self.accuracy} outside [0, 1]")


METRICS_FIELDS = tuple(f.name for f in fields(MetricsRow))


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    if len(labels) == 0:
        return 0.0
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))


# ── CSV ───────────────────────────────────────────────────────────────────────

def write_metrics_csv(path: str | Path, rows: list[MetricsRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=METRICS_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in asdict(row).items()})
    logger.info("Wrote %d metrics rows to %s", len(rows), path)
    return path


def _optional_float(value: str) -> float | None:
    return float(value) if value != "" else None


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    with Path(path).open(encoding="utf-8", newline="") as f:
        return [
            MetricsRow(
                decoder=r["decoder"],
                L=int(r["L"]),
                p=float(r["p"]),
                p_train=_optional_float(r["p_train"]),
                samples=int(r["samples"]),
                accuracy=float(r["accuracy"]),
                loss=_optional_float(r["loss"]),
                seconds_per_decode=float(r["seconds_per_decode"]),
            )
            for r in csv.DictReader(f)
        ]


# ── evaluation ────────────────────────────────────────────────────────────────

@dataclass
class EvalChunk:
    stream_id: int
    syndromes: np.ndarray
    labels: np.ndarray


def evaluation_chunks(
    code: ToricCode,
    p: float,
    n_samples: int,
    seed: int,
    chunk_size: int | None = None,
) -> Iterator[EvalChunk]:
    chunk_size = chunk_size or settings.eval_chunk_size
    noise = NoiseModel(p)
    for stream_id, start in enumerate(range(0, n_samples, chunk_size)):
        size = min(chunk_size, n_samples - start)
        errors = sample_errors(code, noise, stream(seed, stream_id), size)
        yield EvalChunk(stream_id, extract_syndromes(code, errors), logical_labels(code, errors))


@dataclass
class _ChunkResult:
    correct: int
    nll: float | None
    seconds: float


def _decode_chunk(decoder: Decoder, chunk: EvalChunk) -> _ChunkResult:
    started = time.perf_counter()
    batch = decoder.decode_batch(chunk.syndromes)
    seconds = time.perf_counter() - started
    correct = int(np.count_nonzero(batch.labels == chunk.labels))
    nll = None
    if batch.distributions is not None:
        dist = np.asarray(batch.distributions, dtype=np.float64)
        dist = dist / np.maximum(dist.sum(axis=1, keepdims=True), np.finfo(np.float64).tiny)
        picked = dist[np.arange(len(chunk.labels)), chunk.labels]
        nll = float(-np.log(picked + LOSS_EPS).sum())
    return _ChunkResult(correct, nll, seconds)


def decode_stream(decoder: Decoder, chunks: Iterator[EvalChunk], workers: int = 1) -> Iterator[_ChunkResult]:
    """Decode chunks in stream order, keeping at most 2 * workers of them in flight."""
    if workers <= 1:
        for chunk in chunks:
            yield _decode_chunk(decoder, chunk)
        return
    pending: deque[Future[_ChunkResult]] = deque()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for chunk in chunks:
            pending.append(pool.submit(_decode_chunk, decoder, chunk))
            if len(pending) >= 2 * workers:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


def eval_accuracy(
    decoder: Decoder,
    code: ToricCode,
    p: float,
    n_samples: int,
    seed: int,
    p_train: float | None = None,
    workers: int | None = None,
) -> MetricsRow:
    """Fraction of freshly sampled errors whose class the decoder predicts."""
    if n_samples <= 0:
        raise HarnessError(f"sample count must be positive, got {n_samples}")
    bound = decoder.for_code(code)
    workers = workers or settings.workers
    results = list(decode_stream(bound, evaluation_chunks(code, p, n_samples, seed), workers))

    correct = sum(r.correct for r in results)
    nll = None if any(r.nll is None for r in results) else sum(r.nll for r in results)
    row = MetricsRow(
        decoder=bound.name,
        L=code.L,
        p=p,
        p_train=p_train,
        samples=n_samples,
        accuracy=correct / n_samples,
        loss=None if nll is None else nll / n_samples,
        seconds_per_decode=sum(r.seconds for r in results) / n_samples,
    )
    logger.info("%s L=%d p=%.4f: accuracy %.4f over %d samples", row.decoder, code.L, p, row.accuracy, n_samples)
    return row


def bench_runtime(decoder: Decoder, code: ToricCode, p: float, n: int, seed: int = 0) -> list[MetricsRow]:
    """Wall time per decode, once as one batch and once syndrome by syndrome."""
    if n <= 0:
        return []
    bound = decoder.for_code(code)
    chunk = next(evaluation_chunks(code, p, n, seed, chunk_size=n))

    started = time.perf_counter()
    batched = bound.decode_batch(chunk.syndromes)
    batched_seconds = time.perf_counter() - started

    single_labels = np.empty(n, dtype=np.int64)
    started = time.perf_counter()
    for i, bits in enumerate(chunk.syndromes):
        result = bound.decode(Syndrome.from_array(bits, code.L, code.dim))
        single_labels[i] = -1 if result.label is None else result.label.index
    single_seconds = time.perf_counter() - started

    rows = [
        MetricsRow(f"{bound.name}/batched", code.L, p, None, n,
                   accuracy(batched.labels, chunk.labels), None, batched_seconds / n),
        MetricsRow(f"{bound.name}/single", code.L, p, None, n,
                   accuracy(single_labels, chunk.labels), None, single_seconds / n),
    ]
    logger.info(
        "%s L=%d: %.1f decodes/s batched, %.1f decodes/s single",
        bound.name, code.L, _rate(batched_seconds, n), _rate(single_seconds, n),
    )
    if _rate(batched_seconds, n) < THROUGHPUT_TARGET:
        logger.warning(
            "%s L=%d: batched throughput %.1f decodes/s is below the %.0f/s target",
            bound.name, code.L, _rate(batched_seconds, n), THROUGHPUT_TARGET,
        )
    return rows


def _rate(seconds: float, n: int) -> float:
    return n / seconds if seconds > 0 else math.inf
