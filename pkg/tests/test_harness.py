import csv
import dataclasses
import logging
import time

import numpy as np
import pytest

import db
from config import settings
from decoders.base import BatchDecode, ConstantDecoder, Decoder
from decoders.mld import exhaustive_decoder
from harness.dataset import DATASET_FIELDS, syndrome_hex, write_dataset
from harness.experiment import ExperimentConfig, load_experiment
from harness.metrics import (
    METRICS_FIELDS,
    HarnessError,
    MetricsRow,
    accuracy,
    bench_runtime,
    decode_stream,
    eval_accuracy,
    evaluation_chunks,
    read_metrics_csv,
    write_metrics_csv,
)
from harness.plot import plot_csv
from harness.report import (
    format_metrics,
    format_threshold,
    format_trainability,
    write_loss_csv,
    write_threshold_csv,
    write_trainability_csv,
)
from harness.threshold import ThresholdEstimate, crossing, estimate_threshold, threshold_sweep
from harness.trainability import TrainabilityPoint, trainability_metric
from main import EXIT_DOMAIN, EXIT_OK, main


class ReplayDecoder(Decoder):
    """Answers the true labels of the evaluation streams, in stream order."""

    name = "replay"

    def __init__(self, code, p, n, seed):
        super().__init__(code)
        self._labels = [c.labels for c in evaluation_chunks(code, p, n, seed)]

    def decode_batch(self, syndromes: np.ndarray) -> BatchDecode:
        return BatchDecode(labels=self._labels.pop(0))


def _row(**overrides) -> MetricsRow:
    values = dict(decoder="constant", L=3, p=0.01, p_train=None, samples=100,
                  accuracy=0.5, loss=None, seconds_per_decode=1e-5)
    values.update(overrides)
    return MetricsRow(**values)


# ── evaluation ────────────────────────────────────────────────────────────────

def test_accuracy_counts_matches():
    assert accuracy(np.array([0, 1, 2, 3]), np.array([0, 1, 2, 0])) == 0.75
    assert accuracy(np.array([]), np.array([])) == 0.0


def test_replayed_labels_score_one(monkeypatch, code2d):
    monkeypatch.setattr(settings, "eval_chunk_size", 64)
    decoder = ReplayDecoder(code2d, 0.1, 300, seed=2)
    row = eval_accuracy(decoder, code2d, 0.1, 300, seed=2)
    assert row.accuracy == 1.0
    assert row.samples == 300 and row.loss is None


def test_constant_decoder_at_full_noise(code3):
    n = 2000
    labels = np.concatenate([c.labels for c in evaluation_chunks(code3, 1.0, n, seed=1)])
    row = eval_accuracy(ConstantDecoder(code3), code3, 1.0, n, seed=1)
    assert row.accuracy == pytest.approx(np.mean(labels == 0))
    assert row.accuracy < 0.05


def test_evaluation_is_deterministic(code2d):
    decoder = exhaustive_decoder(code2d, 0.05)
    a = eval_accuracy(decoder, code2d, 0.05, 500, seed=3)
    b = eval_accuracy(decoder, code2d, 0.05, 500, seed=3)
    assert (a.accuracy, a.loss, a.samples, a.decoder) == (b.accuracy, b.loss, b.samples, b.decoder)
    assert a.loss is not None and a.loss > 0


def test_parallel_evaluation_matches_serial(monkeypatch, code2d):
    monkeypatch.setattr(settings, "eval_chunk_size", 100)
    decoder = exhaustive_decoder(code2d, 0.05)
    serial = eval_accuracy(decoder, code2d, 0.05, 1000, seed=4, workers=1)
    parallel = eval_accuracy(decoder, code2d, 0.05, 1000, seed=4, workers=4)
    assert serial.accuracy == parallel.accuracy
    assert serial.loss == parallel.loss


def test_eval_rejects_empty_sample(code2d):
    with pytest.raises(HarnessError):
        eval_accuracy(ConstantDecoder(code2d), code2d, 0.05, 0, seed=0)


def test_chunks_cover_every_sample(code2d):
    chunks = list(evaluation_chunks(code2d, 0.1, 250, seed=0, chunk_size=100))
    assert [len(c.labels) for c in chunks] == [100, 100, 50]
    assert [c.stream_id for c in chunks] == [0, 1, 2]


def test_bench_runtime(code2d):
    assert bench_runtime(ConstantDecoder(code2d), code2d, 0.05, 0) == []
    rows = bench_runtime(exhaustive_decoder(code2d, 0.05), code2d, 0.05, 5)
    assert [r.decoder for r in rows] == ["mld-exhaustive/batched", "mld-exhaustive/single"]
    assert rows[0].accuracy == rows[1].accuracy
    assert all(r.seconds_per_decode >= 0 for r in rows)


def test_decode_stream_keeps_a_bounded_window(code2d):
    drawn = []

    def counted():
        for chunk in evaluation_chunks(code2d, 0.1, 1000, seed=4, chunk_size=10):
            drawn.append(chunk.stream_id)
            yield chunk

    results = decode_stream(ConstantDecoder(code2d), counted(), workers=3)
    next(results)
    assert len(drawn) == 6
    rest = list(results)
    assert len(rest) == 99 and len(drawn) == 100
    serial = list(decode_stream(ConstantDecoder(code2d), evaluation_chunks(code2d, 0.1, 1000, seed=4, chunk_size=10)))
    assert [r.correct for r in rest] == [r.correct for r in serial[1:]]


class SlowDecoder(ConstantDecoder):
    def decode_batch(self, syndromes: np.ndarray) -> BatchDecode:
        time.sleep(0.01)
        return super().decode_batch(syndromes)


def test_bench_runtime_warns_below_throughput_target(caplog, code2d):
    with caplog.at_level(logging.WARNING, logger="harness.metrics"):
        bench_runtime(SlowDecoder(code2d), code2d, 0.05, 2)
    assert any("below the" in r.getMessage() for r in caplog.records)
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="harness.metrics"):
        bench_runtime(ConstantDecoder(code2d), code2d, 0.05, 500)
    assert not any(r.levelno >= logging.WARNING for r in caplog.records)


# ── metrics rows + CSV ────────────────────────────────────────────────────────

def test_metrics_row_validation():
    with pytest.raises(HarnessError):
        _row(accuracy=1.5)
    with pytest.raises(HarnessError):
        _row(accuracy=-0.1)


def test_metrics_csv(tmp_path):
    rows = [_row(), _row(decoder="mld-w3", p_train=0.02, loss=0.7, accuracy=0.9)]
    path = write_metrics_csv(tmp_path / "out" / "metrics.csv", rows)
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    assert raw.decode().splitlines()[0] == ",".join(METRICS_FIELDS)
    assert raw.decode().splitlines()[0] == "decoder,L,p,p_train,samples,accuracy,loss,seconds_per_decode"
    assert read_metrics_csv(path) == rows


# ── threshold ─────────────────────────────────────────────────────────────────

P_GRID = np.round(np.linspace(0.01, 0.03, 21), 6)


def _lines(slopes, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return {
        L: 0.5 - slope * (P_GRID - 0.02) + noise * rng.standard_normal(len(P_GRID))
        for L, slope in zip((3, 4, 5), slopes)
    }


def test_crossing_interpolates():
    assert crossing([0.0, 1.0], [1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5)
    assert crossing([0.0, 1.0], [1.0, 1.0], [0.0, 0.0]) is None


def test_threshold_of_exact_lines():
    estimate = estimate_threshold(P_GRID, _lines((20, 40, 80)))
    assert estimate.found
    assert estimate.p_cross == pytest.approx(0.02)
    assert estimate.pairs == [(3, 4), (4, 5)]
    assert estimate.residual == pytest.approx(0.0, abs=1e-12)


def test_parallel_curves_have_no_threshold():
    curves = {3: 0.9 - 10 * P_GRID, 4: 0.8 - 10 * P_GRID}
    estimate = estimate_threshold(P_GRID, curves)
    assert estimate.p_cross is None and not estimate.found
    assert "none found" in format_threshold(estimate)


def test_threshold_tolerates_noise():
    estimate = estimate_threshold(P_GRID, _lines((20, 40, 80), noise=0.005, seed=11))
    assert estimate.found
    assert abs(estimate.p_cross - 0.02) <= P_GRID[1] - P_GRID[0]


def test_threshold_input_errors():
    with pytest.raises(HarnessError):
        estimate_threshold(P_GRID, {3: P_GRID})
    with pytest.raises(HarnessError):
        estimate_threshold(P_GRID[::-1], _lines((20, 40, 80)))
    with pytest.raises(HarnessError):
        estimate_threshold(P_GRID, {3: P_GRID, 4: P_GRID[:-1]})


def test_threshold_sweep(code2d):
    estimate, rows = threshold_sweep(lambda code, p: ConstantDecoder(code), [2, 3], [0.05, 0.1], 200, seed=0, dim=2)
    assert len(rows) == 4
    assert {(r.L, r.p) for r in rows} == {(2, 0.05), (2, 0.1), (3, 0.05), (3, 0.1)}
    assert isinstance(estimate, ThresholdEstimate)
    with pytest.raises(HarnessError):
        threshold_sweep(lambda code, p: ConstantDecoder(code), [3], [0.05, 0.1], 10, dim=2)
    with pytest.raises(HarnessError):
        threshold_sweep(lambda code, p: ConstantDecoder(code), [2, 3], [0.1, 0.05], 10, dim=2)


# ── trainability ──────────────────────────────────────────────────────────────

def test_trainability_metric():
    assert trainability_metric([2.0] * 500) == 0.0
    halving = np.concatenate([np.ones(10), np.linspace(1.0, 0.5, 980), np.full(10, 0.5)])
    assert trainability_metric(halving) == pytest.approx(0.5)
    assert trainability_metric([1.0] * 10 + [1e-9] * 10) == pytest.approx(1.0)
    assert trainability_metric(np.linspace(1.0, 3.0, 200)) == 0.0
    assert trainability_metric([0.4]) == 0.0
    with pytest.raises(HarnessError):
        trainability_metric([])


def test_trainability_window_grows_with_trace():
    trace = np.concatenate([np.full(20, 2.0), np.ones(1960), np.full(20, 0.5)])
    assert trainability_metric(trace) == pytest.approx(0.75)


# ── experiment config ─────────────────────────────────────────────────────────

def test_experiment_config_validation():
    config = ExperimentConfig(error_rates=[0.03, 0.01])
    assert config.error_rates == [0.01, 0.03]
    with pytest.raises(ValueError):
        ExperimentConfig(error_rates=[0.0])
    with pytest.raises(ValueError):
        ExperimentConfig(p_train=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(lattice=1)


def test_overrides_skip_none_and_validate():
    config = ExperimentConfig().with_overrides(lattice=4, seed=None, error_rates=[0.02])
    assert config.lattice == 4 and config.error_rates == [0.02]
    assert config.seed == settings.default_seed
    with pytest.raises(HarnessError):
        config.with_overrides(error_rates=[2.0])


def test_train_config_follows_experiment():
    config = ExperimentConfig(train_samples=100, seed=9)
    train = config.train_config()
    assert train.total_samples == 100 and train.batch_size == 100 and train.seed == 9
    assert ExperimentConfig(dim=2).network_spec().dim == 2


def test_load_experiment(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        "lattice = 4\n"
        "error_rates = [0.02, 0.01]\n"
        "decoder = \"mld\"\n"
        "\n[network]\nhead = \"gap\"\nchannels = [16, 8]\n"
        "\n[training]\nbatch_size = 64\nmax_lr = 0.05\n",
        encoding="utf-8",
    )
    config = load_experiment(path)
    assert config.lattice == 4 and config.error_rates == [0.01, 0.02]
    assert config.network.head == "gap" and config.network.channels == (16, 8)
    assert config.training.batch_size == 64 and config.training.max_lr == 0.05

    path.write_text("lattice = [", encoding="utf-8")
    with pytest.raises(HarnessError):
        load_experiment(path)
    with pytest.raises(HarnessError):
        load_experiment(tmp_path / "missing.toml")


# ── dataset, reports, plots ───────────────────────────────────────────────────

def test_dataset_matches_evaluation_streams(tmp_path, code2d):
    path = write_dataset(tmp_path / "samples.csv", code2d, 0.1, 30, seed=5)
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        assert header == DATASET_FIELDS
        assert header == ("seed", "stream", "sample-idx", "p", "label-index", "syndrome-bits")
        rows = list(reader)
    chunk = next(evaluation_chunks(code2d, 0.1, 30, seed=5))
    assert len(rows) == 30
    assert [int(r[4]) for r in rows] == chunk.labels.tolist()
    assert rows[0][5] == syndrome_hex(chunk.syndromes[0])


def test_report_writers(tmp_path):
    loss = write_loss_csv(tmp_path / "loss.csv", [1.0, 0.5])
    assert loss.read_text().splitlines() == ["step,loss", "0,1.0", "1,0.5"]

    points = [TrainabilityPoint(3, 0.01, 0.4, 0.9)]
    grid = write_trainability_csv(tmp_path / "grid.csv", points)
    assert grid.read_text().splitlines()[1] == "3,0.01,0.4,0.9"
    assert "L=3" in format_trainability(points)

    estimate = ThresholdEstimate(0.02, [(3, 4), (4, 5)], [0.019, 0.021], 0.001)
    threshold = write_threshold_csv(tmp_path / "threshold.csv", estimate)
    assert threshold.read_text().splitlines()[1] == "0.02,3-4;4-5,0.019;0.021,0.001"
    assert "0.02000" in format_threshold(estimate)
    empty = write_threshold_csv(tmp_path / "none.csv", ThresholdEstimate(None))
    assert empty.read_text().splitlines()[1] == ",,,"


def test_format_metrics():
    assert format_metrics([]) == "(no rows)"
    text = format_metrics([_row(decoder="mld-w3", loss=0.25)])
    assert "mld-w3" in text and "loss=0.2500" in text


def test_plot_csv(tmp_path):
    metrics = write_metrics_csv(tmp_path / "m.csv", [_row(p=0.01), _row(p=0.02, accuracy=0.4)])
    assert plot_csv(metrics, tmp_path / "m.png").stat().st_size > 0
    loss = write_loss_csv(tmp_path / "loss.csv", [1.0, 0.5, 0.25])
    assert plot_csv(loss, tmp_path / "loss.png").exists()
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(HarnessError):
        plot_csv(junk, tmp_path / "junk.png")


# ── run registry + command line ───────────────────────────────────────────────

def test_run_registry(tmp_db):
    run_id = db.start_run("eval", {"lattice": 3})
    db.save_metrics(run_id, [_row(), _row(p=0.02)])
    db.save_threshold(run_id, ThresholdEstimate(0.02, [(3, 4)], [0.02], 0.0))
    db.finish_run(run_id, "done", "out.csv")

    run = db.get_runs(1)[0]
    assert run["id"] == run_id and run["status"] == "done" and run["output_path"] == "out.csv"
    assert [m["p"] for m in db.get_run_metrics(run_id)] == [0.01, 0.02]
    assert db.get_run_threshold(run_id)["p_cross"] == 0.02
    assert db.get_run_threshold(run_id + 1) is None


def test_cli_build(tmp_db, tmp_path):
    assert main(["build", "-L", "2", "--dim", "2", "--out", str(tmp_path / "code.nqd")]) == EXIT_OK
    assert (tmp_path / "code.nqd").exists()
    assert db.get_runs(1)[0]["status"] == "done"


def test_cli_eval_writes_metrics(tmp_db, tmp_path):
    out = tmp_path / "eval.csv"
    argv = ["eval", "-L", "2", "--dim", "2", "--decoder", "constant",
            "-p", "0.05", "0.1", "--samples", "100", "--out", str(out)]
    assert main(argv) == EXIT_OK
    rows = read_metrics_csv(out)
    assert [r.p for r in rows] == [0.05, 0.1]
    assert len(db.get_run_metrics(db.get_runs(1)[0]["id"])) == 2


def test_cli_rejects_exhaustive_on_large_code(tmp_db, tmp_path):
    argv = ["eval", "-L", "3", "--decoder", "mld-exhaustive", "-p", "0.05",
            "--samples", "10", "--out", str(tmp_path / "e.csv")]
    assert main(argv) == EXIT_DOMAIN
    assert db.get_runs(1)[0]["status"] == "failed"


def test_trainability_grid_covers_every_pair():
    from harness.trainability import trainability_grid
    from network.model import NetworkSpec
    from network.training import TrainConfig

    points = trainability_grid([2], [0.05, 0.1], NetworkSpec(dim=2, channels=(4,), depth=1),
                               TrainConfig(batch_size=16, total_samples=48), dim=2)
    assert [(pt.L, pt.p_train) for pt in points] == [(2, 0.05), (2, 0.1)]
    assert all(0.0 <= pt.trainability <= 1.0 for pt in points)


def test_p_train_search_bisects():
    from harness.experiment import search_p_train

    config = ExperimentConfig(lattice=2, dim=2, train_samples=32, eval_samples=50,
                              network={"dim": 2, "channels": (4,), "depth": 1})
    search = search_p_train(config, low=0.1, high=0.11, resolution=0.005)
    assert 1 <= len(search.trials) <= 2
    assert search.trials[0][0] == pytest.approx(0.105)
    assert search.best is None or search.best in {p for p, _ in search.trials}
    with pytest.raises(HarnessError):
        search_p_train(config, low=0.2, high=0.1)


def test_cli_train_then_eval(tmp_db, tmp_path):
    checkpoint = tmp_path / "net.nqd"
    assert main(["train", "-L", "2", "--dim", "2", "--samples", "64", "--train-error-rate", "0.05",
                 "--out", str(checkpoint)]) == EXIT_OK
    assert checkpoint.exists() and checkpoint.with_suffix(".loss.csv").exists()

    out = tmp_path / "eval.csv"
    assert main(["eval", "-L", "3", "--dim", "2", "--decoder", "neural", "--checkpoint", str(checkpoint),
                 "-p", "0.05", "--samples", "50", "--out", str(out)]) == EXIT_OK
    (row,) = read_metrics_csv(out)
    assert row.decoder == "neural-gapt" and row.L == 3 and row.p_train == 0.05


def test_same_seed_gives_identical_artifacts(tmp_db, tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "workers", 1)
    outputs = []
    for run in ("a", "b"):
        checkpoint = tmp_path / run / "net.nqd"
        assert main(["train", "-L", "2", "--dim", "2", "--samples", "64", "--seed", "3",
                     "--train-error-rate", "0.05", "--out", str(checkpoint)]) == EXIT_OK
        metrics = tmp_path / run / "eval.csv"
        assert main(["eval", "-L", "2", "--dim", "2", "--decoder", "neural", "--checkpoint", str(checkpoint),
                     "-p", "0.05", "0.1", "--samples", "200", "--seed", "3", "--out", str(metrics)]) == EXIT_OK
        outputs.append((checkpoint, metrics))
    (ckpt_a, csv_a), (ckpt_b, csv_b) = outputs
    assert ckpt_a.read_bytes() == ckpt_b.read_bytes()
    assert ckpt_a.with_suffix(".loss.csv").read_bytes() == ckpt_b.with_suffix(".loss.csv").read_bytes()
    # wall time is the only column allowed to differ
    untimed = [
        [dataclasses.replace(row, seconds_per_decode=0.0) for row in read_metrics_csv(path)]
        for path in (csv_a, csv_b)
    ]
    assert untimed[0] == untimed[1]
    assert len(untimed[0]) == 2
