"""CSV writers for loss traces, trainability grids and thresholds, plus console summaries."""
import csv
from pathlib import Path
from typing import Iterable, Sequence

from harness.metrics import MetricsRow
from harness.threshold import ThresholdEstimate
from harness.trainability import TrainabilityPoint

THRESHOLD_FIELDS = ("p_cross", "pairs", "crossings", "residual")


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_loss_csv(path: str | Path, losses: Sequence[float]) -> Path:
    return _write_rows(path, ("step", "loss"), ((i, loss) for i, loss in enumerate(losses)))


def write_trainability_csv(path: str | Path, points: Sequence[TrainabilityPoint]) -> Path:
    return _write_rows(
        path,
        ("L", "p_train", "trainability", "final_loss"),
        ((pt.L, pt.p_train, pt.trainability, pt.final_loss) for pt in points),
    )


def write_threshold_csv(path: str | Path, estimate: ThresholdEstimate) -> Path:
    row = (
        "" if estimate.p_cross is None else estimate.p_cross,
        ";".join(f"{a}-{b}" for a, b in estimate.pairs),
        ";".join(f"{c:.6g}" for c in estimate.crossings),
        "" if estimate.residual is None else estimate.residual,
    )
    return _write_rows(path, THRESHOLD_FIELDS, [row])


# ── console ───────────────────────────────────────────────────────────────────

def _bar(fraction: float, width: int = 20) -> str:
    filled = min(max(round(fraction * width), 0), width)
    return "█" * filled + "░" * (width - filled)


def format_metrics(rows: Sequence[MetricsRow]) -> str:
    if not rows:
        return "(no rows)"
    lines = []
    for row in rows:
        loss = "-" if row.loss is None else f"{row.loss:.4f}"
        lines.append(
            f"{row.decoder:<22} L={row.L:<2} p={row.p:<8.4f} "
            f"acc={row.accuracy:.4f} {_bar(row.accuracy)} loss={loss} "
            f"{row.seconds_per_decode * 1e6:.1f} us/decode"
        )
    return "\n".join(lines)


def format_threshold(estimate: ThresholdEstimate) -> str:
    if not estimate.found:
        return "Threshold: none found in the swept grid"
    pairs = ", ".join(f"L={a}/L={b} at {c:.5f}" for (a, b), c in zip(estimate.pairs, estimate.crossings))
    return f"Threshold: {estimate.p_cross:.5f} (residual {estimate.residual:.2e})\n  {pairs}"


def format_trainability(points: Sequence[TrainabilityPoint]) -> str:
    return "\n".join(
        f"L={pt.L:<2} p_train={pt.p_train:<8.4f} {pt.trainability:.3f} {_bar(pt.trainability)}"
        for pt in points
    )
