import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from harness.metrics import HarnessError
from network.model import NetworkSpec, build_decoder_network
from network.training import TrainConfig, train
from qec.code import build_toric

logger = logging.getLogger(__name__)

MIN_WINDOW = 10


def trainability_metric(losses: Sequence[float]) -> float:
    """Relative drop between the mean loss of the first and the last window, in [0, 1].

    The window is 1% of the trace, at least 10 points.
    """
    trace = np.asarray(losses, dtype=np.float64)
    if trace.size == 0:
        raise HarnessError("trainability of an empty loss trace is undefined")
    window = min(trace.size, max(MIN_WINDOW, trace.size // 100))
    first = trace[:window].mean()
    last = trace[-window:].mean()
    if first <= 0:
        return 0.0
    return float(np.clip((first - last) / first, 0.0, 1.0))


@dataclass
class TrainabilityPoint:
    L: int
    p_train: float
    trainability: float
    final_loss: float


def trainability_grid(
    lattices: Sequence[int],
    p_trains: Sequence[float],
    spec: NetworkSpec | None = None,
    config: TrainConfig | None = None,
    dim: int = 3,
) -> list[TrainabilityPoint]:
    """Train one fresh network per (L, p_train) and score its loss trace."""
    config = config or TrainConfig()
    points = []
    for L in lattices:
        code = build_toric(L, dim)
        for p_train in p_trains:
            model = build_decoder_network(code, spec, seed=config.seed)
            result = train(model, p_train, config)
            point = TrainabilityPoint(L, p_train, trainability_metric(result.losses), result.final_loss)
            logger.info("L=%d p_train=%.4f: trainability %.3f", L, p_train, point.trainability)
            points.append(point)
    return points
