"""
Threshold estimation from accuracy curves of increasing lattice size.

Each curve is interpolated piecewise-linearly over the p grid; every pair of
consecutive lattice sizes gives at most one crossing, and the reported
threshold is the median crossing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from decoders.base import Decoder
from harness.metrics import HarnessError, MetricsRow, eval_accuracy
from qec.code import ToricCode, build_toric

logger = logging.getLogger(__name__)


@dataclass
class ThresholdEstimate:
    """``p_cross`` is None when no pair of curves crosses inside the grid."""

    p_cross: float | None
    pairs: list[tuple[int, int]] = field(default_factory=list)
    crossings: list[float] = field(default_factory=list)
    residual: float | None = None

    @property
    def found(self) -> bool:
        return self.p_cross is not None


def crossing(p_grid: Sequence[float], acc_a: Sequence[float], acc_b: Sequence[float]) -> float | None:
    """First p where the interpolated curves meet, or None."""
    p = np.asarray(p_grid, dtype=np.float64)
    diff = np.asarray(acc_a, dtype=np.float64) - np.asarray(acc_b, dtype=np.float64)
    for i in range(len(p)):
        if diff[i] == 0:
            return float(p[i])
        if i + 1 < len(p) and diff[i] * diff[i + 1] < 0:
            return float(p[i] - diff[i] * (p[i + 1] - p[i]) / (diff[i + 1] - diff[i]))
    return None


def estimate_threshold(p_grid: Sequence[float], curves: Mapping[int, Sequence[float]]) -> ThresholdEstimate:
    p = np.asarray(p_grid, dtype=np.float64)
    if len(curves) < 2:
        raise HarnessError(f"need at least two lattice sizes, got {sorted(curves)}")
    if len(p) < 2 or np.any(np.diff(p) <= 0):
        raise HarnessError(f"p grid must be strictly increasing, got {list(p_grid)}")
    for L, acc in curves.items():
        if len(acc) != len(p):
            raise HarnessError(f"L={L} curve has {len(acc)} points for a grid of {len(p)}")

    lattices = sorted(curves)
    pairs, crossings = [], []
    for small, large in zip(lattices, lattices[1:]):
        cross = crossing(p, curves[small], curves[large])
        if cross is not None:
            pairs.append((small, large))
            crossings.append(cross)

    if not crossings:
        logger.warning("No crossing found for L=%s on p in [%.4f, %.4f]", lattices, p[0], p[-1])
        return ThresholdEstimate(None)
    median = float(np.median(crossings))
    residual = float(max(abs(c - median) for c in crossings))
    logger.info("Threshold %.5f from %d pair(s), residual %.2e", median, len(pairs), residual)
    return ThresholdEstimate(median, pairs, crossings, residual)


def threshold_sweep(
    decoder_for: Callable[[ToricCode, float], Decoder],
    lattices: Sequence[int],
    p_grid: Sequence[float],
    n_per_point: int,
    seed: int = 0,
    dim: int = 3,
) -> tuple[ThresholdEstimate, list[MetricsRow]]:
    """Evaluate ``decoder_for(code, p)`` on every (L, p) and locate the crossing."""
    if len(lattices) < 2:
        raise HarnessError(f"need at least two lattice sizes, got {list(lattices)}")
    if list(p_grid) != sorted(p_grid):
        raise HarnessError(f"p grid must be sorted, got {list(p_grid)}")
    rows: list[MetricsRow] = []
    curves: dict[int, list[float]] = {}
    for L in lattices:
        code = build_toric(L, dim)
        curves[L] = []
        for p in p_grid:
            row = eval_accuracy(decoder_for(code, p), code, p, n_per_point, seed)
            rows.append(row)
            curves[L].append(row.accuracy)
    return estimate_threshold(p_grid, curves), rows
