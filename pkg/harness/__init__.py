from harness.metrics import HarnessError, MetricsRow, bench_runtime, eval_accuracy
from harness.threshold import ThresholdEstimate, estimate_threshold, threshold_sweep
from harness.trainability import trainability_grid, trainability_metric

__all__ = [
    "HarnessError",
    "MetricsRow",
    "bench_runtime",
    "eval_accuracy",
    "ThresholdEstimate",
    "estimate_threshold",
    "threshold_sweep",
    "trainability_grid",
    "trainability_metric",
]
