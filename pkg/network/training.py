"""
Supervised training of a PooledDecoder on freshly sampled syndromes.

Every batch is drawn from its own seeded stream, so a run is fully determined
by (code, p_train, TrainConfig) when torch runs single-threaded.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch
from pydantic import BaseModel, Field, model_validator

from network.model import PooledDecoder, log_pooled
from qec.code import ToricCode
from qec.noise import NoiseModel, extract_syndromes, logical_labels, sample_errors, stream

logger = logging.getLogger(__name__)

# Training batches use stream ids above every evaluation stream
TRAIN_STREAM_OFFSET = 1 << 32


class TrainConfig(BaseModel):
    batch_size: int = Field(default=512, gt=0)
    total_samples: int = Field(default=1_000_000, gt=0)
    max_lr: float = Field(default=0.1, gt=0)
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = Field(default=0.05, ge=0)
    eps: float = Field(default=1e-8, gt=0)
    pct_start: float = Field(default=0.3, gt=0, lt=1)
    div_factor: float = Field(default=25.0, gt=0)
    final_div_factor: float = Field(default=1e4, gt=0)
    class_weight_smoothing: float = Field(default=1.0, ge=0)
    seed: int = 0
    log_every: int = Field(default=100, gt=0)

    @model_validator(mode="after")
    def _batch_fits(self) -> TrainConfig:
        if self.batch_size > self.total_samples:
            raise ValueError(f"batch size {self.batch_size} exceeds total samples {self.total_samples}")
        return self

    @property
    def steps(self) -> int:
        return self.total_samples // self.batch_size


# ── class weights ─────────────────────────────────────────────────────────────

@dataclass
class ClassWeightTracker:
    """Cumulative label counts; weight_j = seen / ((count_j + smoothing) * classes)."""

    n_classes: int
    smoothing: float = 1.0
    counts: np.ndarray = field(init=False)
    seen: int = 0

    def __post_init__(self) -> None:
        self.counts = np.zeros(self.n_classes, dtype=np.int64)

    def update(self, labels: np.ndarray) -> None:
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        self.counts += np.bincount(labels, minlength=self.n_classes)
        self.seen += labels.size

    def weights(self) -> np.ndarray:
        return self.seen / ((self.counts + self.smoothing) * self.n_classes)


def class_weights(tracker: ClassWeightTracker, labels: np.ndarray) -> np.ndarray:
    tracker.update(labels)
    return tracker.weights()


def weighted_ce(pred: torch.Tensor, labels: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """-(1/N) sum_i w[label_i] log(pred[i, label_i]) on (N, classes) distributions."""
    picked = log_pooled(pred).gather(1, labels.view(-1, 1)).squeeze(1)
    return -(weights[labels] * picked).mean()


# ── optimizer and schedule ────────────────────────────────────────────────────

def _annealing_cos(start: float, end: float, pct: float) -> float:
    return end + (start - end) / 2.0 * (math.cos(math.pi * pct) + 1)


def onecycle_lr(
    step: int,
    total: int,
    max_lr: float,
    pct_start: float = 0.3,
    div_factor: float = 25.0,
    final_div_factor: float = 1e4,
) -> float:
    """Two-phase cosine one-cycle: warm up to max_lr, then anneal far below the start."""
    initial = max_lr / div_factor
    minimum = initial / final_div_factor
    peak = float(pct_start * total) - 1
    last = total - 1
    step = min(max(step, 0), last)
    if step <= peak:
        return _annealing_cos(initial, max_lr, step / peak if peak > 0 else 1.0)
    return _annealing_cos(max_lr, minimum, (step - peak) / (last - peak))


def build_optimizer(params, config: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        params,
        lr=config.max_lr / config.div_factor,
        betas=config.betas,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )


def adamw_step(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()


# ── data and loop ─────────────────────────────────────────────────────────────

def training_batch(
    code: ToricCode,
    noise: NoiseModel,
    seed: int,
    step: int,
    batch_size: int,
) -> tuple[torch.Tensor, torch.Tensor]:
    rng = stream(seed, TRAIN_STREAM_OFFSET + step)
    errors = sample_errors(code, noise, rng, batch_size)
    syndromes = torch.from_numpy(extract_syndromes(code, errors).astype(np.float32))
    labels = torch.from_numpy(logical_labels(code, errors))
    return syndromes, labels


@dataclass
class TrainResult:
    losses: list[float]
    samples: int
    seconds: float
    class_counts: np.ndarray

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else math.nan


def train(
    model: PooledDecoder,
    p_train: float,
    config: TrainConfig | None = None,
) -> TrainResult:
    config = config or TrainConfig()
    code = model.code
    noise = NoiseModel(p_train)
    optimizer = build_optimizer(model.parameters(), config)
    tracker = ClassWeightTracker(code.n_classes, config.class_weight_smoothing)
    total = config.steps
    losses: list[float] = []

    logger.info(
        "Training L=%d dim=%d at p=%.4f: %d steps of %d samples",
        code.L, code.dim, p_train, total, config.batch_size,
    )
    started = time.perf_counter()
    model.train()
    for step in range(total):
        syndromes, labels = training_batch(code, noise, config.seed, step, config.batch_size)
        weights = torch.from_numpy(class_weights(tracker, labels.numpy()).astype(np.float32))

        optimizer.zero_grad(set_to_none=True)
        loss = weighted_ce(model(syndromes), labels, weights)
        loss.backward()
        adamw_step(optimizer, onecycle_lr(
            step, total, config.max_lr, config.pct_start, config.div_factor, config.final_div_factor,
        ))
        losses.append(float(loss.detach()))

        if (step + 1) % config.log_every == 0 or step + 1 == total:
            logger.info("step %d/%d loss=%.4f", step + 1, total, losses[-1])
    model.eval()

    return TrainResult(
        losses=losses,
        samples=total * config.batch_size,
        seconds=time.perf_counter() - started,
        class_counts=tracker.counts.copy(),
    )
