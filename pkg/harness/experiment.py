"""
Experiment configuration and the training-rate search.

An ExperimentConfig is read from a TOML file whose top-level keys mirror the
model fields; ``[network]`` and ``[training]`` tables fill the nested models.
Command-line flags are applied on top with ``with_overrides``.
"""
from __future__ import annotations

import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from config import settings
from decoders.neural import NeuralDecoder
from harness.metrics import HarnessError, eval_accuracy
from network.model import NetworkSpec, PooledDecoder, build_decoder_network
from network.training import TrainConfig, TrainResult, train
from qec.code import build_toric

logger = logging.getLogger(__name__)

# Search resolution for the training error rate: 0.25 percentage points
P_TRAIN_RESOLUTION = 0.0025


class ExperimentConfig(BaseModel):
    lattice: int = Field(default=3, ge=2)
    lattices: list[int] = Field(default_factory=lambda: [3, 4, 5])
    dim: Literal[2, 3] = 3
    error_rates: list[float] = Field(default_factory=lambda: [0.01])
    p_train: float = 0.01
    train_samples: int = Field(default=1_000_000, gt=0)
    eval_samples: int = Field(default=1_000_000, gt=0)
    decoder: str = "neural"
    w_max: int = Field(default=3, ge=0)
    checkpoint: str | None = None
    seed: int = Field(default_factory=lambda: settings.default_seed)
    output_dir: str = Field(default_factory=lambda: settings.output_dir)
    network: NetworkSpec = Field(default_factory=NetworkSpec)
    training: TrainConfig = Field(default_factory=TrainConfig)

    @field_validator("error_rates")
    @classmethod
    def _rates_in_range(cls, v: list[float]) -> list[float]:
        bad = [p for p in v if not 0.0 < p < 1.0]
        if bad or not v:
            raise ValueError(f"error rates must lie in (0, 1), got {v}")
        return sorted(v)

    @field_validator("p_train")
    @classmethod
    def _p_train_in_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"p_train must lie in (0, 1), got {v}")
        return v

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Copy with every non-None override applied and validated."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise HarnessError(f"invalid experiment settings: {e}") from e

    def train_config(self) -> TrainConfig:
        batch = min(self.training.batch_size, self.train_samples)
        return self.training.model_copy(update={
            "total_samples": self.train_samples,
            "batch_size": batch,
            "seed": self.seed,
        })

    def network_spec(self) -> NetworkSpec:
        return self.network.model_copy(update={"dim": self.dim})

    @property
    def out_path(self) -> Path:
        return Path(self.output_dir)


def load_experiment(path: str | Path) -> ExperimentConfig:
    try:
        with Path(path).open("rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise HarnessError(f"cannot read experiment config {path}: {e}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise HarnessError(f"invalid experiment config {path}: {e}") from e


def train_decoder(config: ExperimentConfig, p_train: float | None = None) -> tuple[PooledDecoder, TrainResult]:
    code = build_toric(config.lattice, config.dim)
    model = build_decoder_network(code, config.network_spec(), seed=config.seed)
    result = train(model, p_train if p_train is not None else config.p_train, config.train_config())
    return model, result


# ── p_train search ────────────────────────────────────────────────────────────

@dataclass
class PTrainSearch:
    """Highest training rate reaching accuracy above ``target``; None if no trial did."""

    best: float | None
    target: float
    trials: list[tuple[float, float]] = field(default_factory=list)  # (p_train, accuracy)


def search_p_train(
    config: ExperimentConfig,
    low: float = P_TRAIN_RESOLUTION,
    high: float = 0.2,
    resolution: float = P_TRAIN_RESOLUTION,
    target: float = 0.5,
) -> PTrainSearch:
    """Binary search over a grid of training rates.

    Each trial trains a fresh network at p_train and evaluates it at
    p = p_train. Accuracy is assumed to fall as p_train grows.
    """
    if not 0 < low <= high < 1:
        raise HarnessError(f"search interval [{low}, {high}] must lie in (0, 1)")
    grid = np.round(np.arange(low, high + resolution / 2, resolution), 10)
    code = build_toric(config.lattice, config.dim)
    search = PTrainSearch(best=None, target=target)

    lo, hi = 0, len(grid) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        p_train = float(grid[mid])
        model, _ = train_decoder(config, p_train)
        row = eval_accuracy(NeuralDecoder(model), code, p_train, config.eval_samples, config.seed, p_train=p_train)
        search.trials.append((p_train, row.accuracy))
        logger.info("p_train trial %.4f: accuracy %.4f", p_train, row.accuracy)
        if row.accuracy > target:
            search.best = p_train
            lo = mid + 1
        else:
            hi = mid - 1
    return search
