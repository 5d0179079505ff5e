"""Toric decoder - command-line entry point."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable

import db
from config import settings

logging.basicConfig(
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    stream=sys.stdout,
)
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_UNEXPECTED, EXIT_DOMAIN = 0, 1, 2


def _experiment(args: argparse.Namespace, samples_field: str = "eval_samples"):
    from harness.experiment import ExperimentConfig, load_experiment

    config = load_experiment(args.config) if getattr(args, "config", None) else ExperimentConfig()
    return config.with_overrides(**{
        "lattice": getattr(args, "lattice", None),
        "lattices": getattr(args, "lattices", None),
        "dim": getattr(args, "dim", None),
        "error_rates": getattr(args, "error_rate", None),
        "p_train": getattr(args, "train_error_rate", None),
        samples_field: getattr(args, "samples", None),
        "seed": getattr(args, "seed", None),
        "decoder": getattr(args, "decoder", None),
        "checkpoint": getattr(args, "checkpoint", None),
        "w_max": getattr(args, "w_max", None),
    })


def _out(args: argparse.Namespace, config, default_name: str) -> Path:
    return Path(args.out) if args.out else config.out_path / default_name


def _decoder_for(config):
    """(code, p) -> decoder for the configured decoder name."""
    from decoders.factory import get_decoder
    return lambda code, p: get_decoder(config.decoder, code, p=p, checkpoint=config.checkpoint, w_max=config.w_max)


def _checkpoint_p_train(config) -> float | None:
    if config.decoder != "neural" or not config.checkpoint:
        return None
    from qec.container import read_container
    _, meta = read_container(config.checkpoint)
    return meta.get("p_train")


# ── subcommands ───────────────────────────────────────────────────────────────

def cmd_build(args: argparse.Namespace, run_id: int) -> int:
    from qec.code import build_toric, validate
    from qec.container import write_code

    code = build_toric(args.lattice, args.dim)
    report = validate(code)
    print(f"L={code.L} dim={code.dim}: {code.n_checks} checks x {code.n_qubits} qubits, "
          f"{code.n_logicals} logicals")
    for failure in report.failures:
        print(f"  FAIL {failure}")
    print("valid" if report.passed else "INVALID")
    if args.out:
        write_code(args.out, code)
    if not report.passed:
        return EXIT_DOMAIN
    db.finish_run(run_id, "done", args.out)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, run_id: int) -> int:
    from harness.dataset import write_dataset
    from qec.code import build_toric

    config = _experiment(args)
    code = build_toric(config.lattice, config.dim)
    base = _out(args, config, f"samples-L{code.L}.csv")
    paths = []
    for p in config.error_rates:
        out = base if len(config.error_rates) == 1 else base.with_name(f"{base.stem}-p{p:g}{base.suffix}")
        paths.append(str(write_dataset(out, code, p, config.eval_samples, config.seed)))
    db.finish_run(run_id, "done", ";".join(paths))
    return EXIT_OK


def cmd_train(args: argparse.Namespace, run_id: int) -> int:
    from harness.experiment import search_p_train, train_decoder
    from harness.report import write_loss_csv
    from network.checkpoint import save_checkpoint

    config = _experiment(args, samples_field="train_samples")
    if args.head:
        config = config.with_overrides(network={**config.network.model_dump(), "head": args.head})

    if args.search:
        search = search_p_train(config)
        for p_train, acc in search.trials:
            print(f"p_train={p_train:.4f} accuracy={acc:.4f}")
        print(f"highest p_train with accuracy > {search.target}: {search.best}")
        if search.best is None:
            return EXIT_OK
        config = config.with_overrides(p_train=search.best)

    model, result = train_decoder(config)
    out = _out(args, config, f"{config.network.head}-L{config.lattice}-p{config.p_train:g}.nqd")
    save_checkpoint(out, model, config.train_config(), config.p_train)
    write_loss_csv(out.with_suffix(".loss.csv"), result.losses)
    print(f"trained {result.samples} samples in {result.seconds:.1f}s, final loss {result.final_loss:.4f}")
    db.finish_run(run_id, "done", str(out))
    return EXIT_OK


def cmd_trainability(args: argparse.Namespace, run_id: int) -> int:
    from harness.report import format_trainability, write_trainability_csv
    from harness.trainability import trainability_grid

    config = _experiment(args, samples_field="train_samples")
    p_trains = args.train_error_rate_grid or config.error_rates
    points = trainability_grid(config.lattices, p_trains, config.network_spec(), config.train_config(), config.dim)
    out = write_trainability_csv(_out(args, config, "trainability.csv"), points)
    print(format_trainability(points))
    db.finish_run(run_id, "done", str(out))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, run_id: int) -> int:
    from harness.metrics import eval_accuracy, write_metrics_csv
    from harness.report import format_metrics
    from qec.code import build_toric

    config = _experiment(args)
    code = build_toric(config.lattice, config.dim)
    decoder_for = _decoder_for(config)
    p_train = _checkpoint_p_train(config)
    rows = [
        eval_accuracy(decoder_for(code, p), code, p, config.eval_samples, config.seed, p_train=p_train)
        for p in config.error_rates
    ]
    out = write_metrics_csv(_out(args, config, f"eval-{config.decoder}-L{code.L}.csv"), rows)
    db.save_metrics(run_id, rows)
    print(format_metrics(rows))
    db.finish_run(run_id, "done", str(out))
    return EXIT_OK


def cmd_threshold(args: argparse.Namespace, run_id: int) -> int:
    from harness.metrics import write_metrics_csv
    from harness.report import format_threshold, write_threshold_csv
    from harness.threshold import threshold_sweep

    config = _experiment(args)
    estimate, rows = threshold_sweep(
        _decoder_for(config), config.lattices, config.error_rates, config.eval_samples, config.seed, config.dim,
    )
    out = _out(args, config, f"threshold-{config.decoder}.csv")
    write_threshold_csv(out, estimate)
    write_metrics_csv(out.with_suffix(".metrics.csv"), rows)
    db.save_metrics(run_id, rows)
    db.save_threshold(run_id, estimate)
    print(format_threshold(estimate))
    db.finish_run(run_id, "done", str(out))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, run_id: int) -> int:
    from harness.metrics import bench_runtime, write_metrics_csv
    from harness.report import format_metrics
    from qec.code import build_toric

    config = _experiment(args)
    code = build_toric(config.lattice, config.dim)
    p = config.error_rates[0]
    rows = bench_runtime(_decoder_for(config)(code, p), code, p, config.eval_samples, config.seed)
    out = write_metrics_csv(_out(args, config, f"bench-{config.decoder}-L{code.L}.csv"), rows)
    db.save_metrics(run_id, rows)
    print(format_metrics(rows))
    db.finish_run(run_id, "done", str(out))
    return EXIT_OK


def cmd_plot(args: argparse.Namespace, run_id: int) -> int:
    from harness.plot import plot_csv

    csv_path = Path(args.csv)
    out = plot_csv(csv_path, Path(args.out) if args.out else csv_path.with_suffix(".png"))
    print(out)
    db.finish_run(run_id, "done", str(out))
    return EXIT_OK


def cmd_runs(args: argparse.Namespace, run_id: int) -> int:
    for run in db.get_runs(args.limit):
        if run["id"] == run_id:
            continue
        print(f"#{run['id']:<4} {run['created_at'][:19]} {run['command']:<12} {run['status']:<8} "
              f"{run['output_path'] or ''}")
        for m in db.get_run_metrics(run["id"]):
            print(f"      {m['decoder']} L={m['L']} p={m['p']:.4f} acc={m['accuracy']:.4f}")
    return EXIT_OK


# ── parser ────────────────────────────────────────────────────────────────────

def _common(p: argparse.ArgumentParser, lattice: bool = True) -> None:
    p.add_argument("--config", help="TOML file mirroring ExperimentConfig")
    if lattice:
        p.add_argument("--lattice", "-L", type=int, help="lattice size L")
    p.add_argument("--dim", type=int, choices=(2, 3), help="code dimension")
    p.add_argument("--seed", type=int, help="root seed of every sampling stream")
    p.add_argument("--samples", type=int, help="number of samples")
    p.add_argument("--out", help="output path")


def _decoding(p: argparse.ArgumentParser) -> None:
    from decoders.factory import DECODER_NAMES

    p.add_argument("--decoder", choices=DECODER_NAMES, help="decoder to evaluate")
    p.add_argument("--checkpoint", help="network checkpoint for the neural decoder")
    p.add_argument("--w-max", type=int, help="maximum enumerated error weight for the mld decoder")
    p.add_argument("--error-rate", "-p", type=float, nargs="+", help="physical error rate(s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toric-decoder", description="Toric code decoding experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="construct a code and validate it")
    p.add_argument("--lattice", "-L", type=int, default=3)
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.add_argument("--out", help="write the code to this NQD1 file")
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("sample", help="dump sampled syndromes and labels as CSV")
    _common(p)
    p.add_argument("--error-rate", "-p", type=float, nargs="+")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("train", help="train a network and write a checkpoint plus loss trace")
    _common(p)
    p.add_argument("--train-error-rate", type=float, help="training error rate p_train")
    p.add_argument("--head", choices=("gap", "gapt"), help="pooling head")
    p.add_argument("--search", action="store_true",
                   help="binary-search the highest p_train reaching accuracy above 0.5 first")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("trainability", help="trainability over a (L, p_train) grid")
    _common(p, lattice=False)
    p.add_argument("--lattices", type=int, nargs="+")
    p.add_argument("--train-error-rate-grid", type=float, nargs="+")
    p.set_defaults(handler=cmd_trainability)

    p = sub.add_parser("eval", help="accuracy of a decoder at one or more error rates")
    _common(p)
    _decoding(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("threshold", help="accuracy sweep over lattices and error rates")
    _common(p, lattice=False)
    _decoding(p)
    p.add_argument("--lattices", type=int, nargs="+")
    p.set_defaults(handler=cmd_threshold)

    p = sub.add_parser("bench", help="decode throughput, batched and single")
    _common(p)
    _decoding(p)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("plot", help="render a CSV written by another subcommand")
    p.add_argument("csv")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("runs", help="list recent runs")
    p.add_argument("--limit", type=int, default=10)
    p.set_defaults(handler=cmd_runs)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    import torch
    torch.set_num_threads(settings.torch_threads)

    db.init_db()
    options = {k: v for k, v in vars(args).items() if k not in ("handler", "command")}
    run_id = db.start_run(args.command, options, getattr(args, "out", None))
    handler: Callable[[argparse.Namespace, int], int] = args.handler
    try:
        code = handler(args, run_id)
    except (ValueError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        db.finish_run(run_id, "failed")
        return EXIT_DOMAIN
    except Exception:
        logger.error("%s crashed", args.command, exc_info=True)
        db.finish_run(run_id, "crashed")
        return EXIT_UNEXPECTED
    if code != EXIT_OK:
        db.finish_run(run_id, "failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
