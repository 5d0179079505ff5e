"""Static figures rendered from the CSV files the other subcommands write."""
import csv
import logging
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from harness.metrics import HarnessError, read_metrics_csv  # noqa: E402

logger = logging.getLogger(__name__)


def _csv_header(path: Path) -> list[str]:
    with path.open(encoding="utf-8", newline="") as f:
        return next(csv.reader(f), [])


def plot_accuracy(csv_path: Path, out_path: Path) -> Path:
    curves: dict[tuple[str, int], list[tuple[float, float]]] = defaultdict(list)
    for row in read_metrics_csv(csv_path):
        curves[(row.decoder, row.L)].append((row.p, row.accuracy))

    fig, ax = plt.subplots(figsize=(6, 4))
    for (decoder, L), points in sorted(curves.items()):
        points.sort()
        ax.plot([p for p, _ in points], [a for _, a in points], "o-", label=f"{decoder} L={L}")
    ax.set_xlabel("physical error rate p")
    ax.set_ylabel("accuracy")
    ax.legend()
    return _save(fig, out_path)


def plot_loss(csv_path: Path, out_path: Path) -> Path:
    with csv_path.open(encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([int(r["step"]) for r in rows], [float(r["loss"]) for r in rows])
    ax.set_xlabel("step")
    ax.set_ylabel("weighted cross-entropy")
    ax.set_yscale("log")
    return _save(fig, out_path)


def plot_trainability(csv_path: Path, out_path: Path) -> Path:
    with csv_path.open(encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    lattices = sorted({int(r["L"]) for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for L in lattices:
        points = sorted((float(r["p_train"]), float(r["trainability"])) for r in rows if int(r["L"]) == L)
        ax.plot([p for p, _ in points], [t for _, t in points], "o-", label=f"L={L}")
    ax.set_xlabel("training error rate")
    ax.set_ylabel("trainability")
    ax.set_ylim(0, 1)
    ax.legend()
    return _save(fig, out_path)


def _save(fig, out_path: Path) -> Path:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    logger.info("Saved figure %s", out_path)
    return out_path


def plot_csv(csv_path: str | Path, out_path: str | Path) -> Path:
    """Pick the figure from the CSV header: metrics, loss trace or trainability grid."""
    csv_path, out_path = Path(csv_path), Path(out_path)
    header = set(_csv_header(csv_path))
    if {"decoder", "accuracy", "p"} <= header:
        return plot_accuracy(csv_path, out_path)
    if {"step", "loss"} <= header:
        return plot_loss(csv_path, out_path)
    if {"L", "p_train", "trainability"} <= header:
        return plot_trainability(csv_path, out_path)
    raise HarnessError(f"{csv_path} has no columns the plot command knows ({sorted(header)})")
