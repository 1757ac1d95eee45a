"""``jamrec`` command line: gen-data, train, eval, sweep, confusion.

Every command writes its outputs atomically and then a ``manifest.json`` that
records the resolved configuration, master seed, tool version, output files
and wall-clock timings.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config
from .encoding import encode_trace, make_training_chunks
from .evaluation import (accuracy, confusion_matrix, evaluate_run, per_policy_accuracy,
                         row_normalized, sweep_switching_times)
from .io import (FormatError, atomic_write_json, atomic_write_text, config_hash, csv_text,
                 read_dataset, read_trace, write_dataset, write_trace)
from .sim import ConfigError, PolicyKind, run_episode
from .training import train

log = logging.getLogger("jamrec")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, runs=getattr(args, "runs", None))


class _Manifest:
    def __init__(self, command: str, argv: list[str], config: ExperimentConfig, out: Path):
        self.out = out
        self.data = {
            "command": command,
            "argv": argv,
            "tool_version": __version__,
            "config": config.to_dict(),
            "config_hash": config.digest(),
            "master_seed": config.seed,
            "outputs": {},
            "timings": {},
        }
        self._t0 = time.perf_counter()

    def output(self, role: str, path: Path) -> None:
        self.data["outputs"][role] = str(path)

    def time(self, label: str, seconds: float) -> None:
        self.data["timings"][label] = round(seconds, 4)

    def write(self) -> None:
        self.time("total_s", time.perf_counter() - self._t0)
        path = self.out / "manifest.json"
        atomic_write_json(path, self.data)


def cmd_gen_data(args, argv) -> int:
    cfg = _resolve(args)
    sim = replace(cfg.sim, switch_period=args.switch_period or cfg.sim.switch_period,
                  episode_len=args.episode_len or cfg.sim.episode_len).validate()
    cfg = replace(cfg, sim=sim)
    out = Path(args.out)
    man = _Manifest("gen-data", argv, cfg, out)
    t = time.perf_counter()
    trace = run_episode(sim)
    man.time("simulate_s", time.perf_counter() - t)

    trace_path = out / "trace.csv"
    sidecar = write_trace(trace_path, trace, sim)
    chunks = make_training_chunks(encode_trace(trace, sim.n_channels), cfg.chunk_len,
                                  stride=cfg.chunk_stride)
    dataset_path = out / "dataset.bin"
    write_dataset(dataset_path, chunks, {
        "n_users": sim.n_users,
        "chunk_stride": cfg.chunk_stride,
        "provenance": {"seed": sim.seed, "config_hash": config_hash(asdict(sim)),
                       "trace": trace_path.name},
    })
    man.output("trace", trace_path)
    man.output("trace_sidecar", sidecar)
    man.output("dataset", dataset_path)
    man.write()
    print(f"wrote {len(trace)} slots to {trace_path} and {len(chunks)} chunks to {dataset_path}")
    return 0


def cmd_train(args, argv) -> int:
    cfg = _resolve(args)
    overrides = {k: v for k, v in (("epochs", args.epochs), ("learning_rate", args.lr),
                                   ("hidden_dim", args.hidden_dim), ("batch_size", args.batch_size))
                 if v is not None}
    hyper = replace(cfg.hyper, **overrides)
    if args.seed is not None:
        hyper = replace(hyper, seed=args.seed)
    hyper.validate()
    cfg = replace(cfg, hyper=hyper)
    out = Path(args.out)
    man = _Manifest("train", argv, cfg, out)

    chunks, header = read_dataset(args.data)
    t = time.perf_counter()
    result = train(chunks, hyper)
    man.time("train_s", time.perf_counter() - t)

    ckpt = out / "checkpoint.bin"
    save_checkpoint(result.params, hyper, ckpt)
    history = out / "loss_history.csv"
    atomic_write_text(history, csv_text([["epoch", "mean_loss"]]
                                        + [[i, repr(v)] for i, v in enumerate(result.loss_history)]))
    man.data["dataset"] = {"path": str(args.data), "header": header}
    man.data["train_accuracy"] = result.train_accuracy
    man.output("checkpoint", ckpt)
    man.output("loss_history", history)
    man.write()
    print(f"final loss {result.loss_history[-1]:.5f}, training accuracy {result.train_accuracy:.4f}")
    return 0


def cmd_eval(args, argv) -> int:
    cfg = _resolve(args)
    params, hyper = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    man = _Manifest("eval", argv, cfg, out)
    if args.trace:
        trace, sim = read_trace(args.trace)
        n_channels = sim.n_channels if sim else params.input_dim // 2
    else:
        sim = replace(cfg.sim, episode_len=cfg.test_len)
        trace = run_episode(sim)
        n_channels = sim.n_channels
    if 2 * n_channels != params.input_dim:
        raise ConfigError(f"checkpoint expects {params.input_dim // 2} channels, trace has {n_channels}")
    window = args.window or cfg.window_len
    t = time.perf_counter()
    pairs = evaluate_run(params, trace, window, n_channels)
    man.time("eval_s", time.perf_counter() - t)

    cm = confusion_matrix(pairs)
    slots = np.arange(window - 1, window - 1 + len(pairs))
    pred_path = out / "predictions.csv"
    atomic_write_text(pred_path, csv_text([["t", "true", "predicted"]]
                                          + [[int(s), int(a), int(b)] for s, (a, b) in zip(slots, pairs)]))
    report = {
        "accuracy": accuracy(pairs),
        "per_policy_accuracy": [None if np.isnan(v) else v for v in per_policy_accuracy(cm)],
        "policies": [p.name for p in PolicyKind],
        "confusion": cm.tolist(),
        "window_len": window,
        "n_slots": int(len(pairs)),
    }
    report_path = out / "report.json"
    atomic_write_json(report_path, report)
    man.output("predictions", pred_path)
    man.output("report", report_path)
    man.write()
    print(f"accuracy {report['accuracy']:.4f} over {len(pairs)} slots")
    return 0


def _progress(args):
    if args.quiet:
        return None

    def report(res):
        print(f"  K={res.switch_period:<4d} run={res.run:<3d} accuracy={res.accuracy:.4f}",
              file=sys.stderr, flush=True)
    return report


def format_table(confusion: np.ndarray) -> str:
    names = [p.name for p in PolicyKind]
    norm = row_normalized(confusion)
    lines = ["true\\pred " + " ".join(f"{n:>6}" for n in names)]
    for name, row in zip(names, norm):
        lines.append(f"{name:<10}" + " ".join(f"{v:6.1f}" for v in row))
    return "\n".join(lines)


def cmd_sweep(args, argv) -> int:
    cfg = _resolve(args)
    out = Path(args.out)
    man = _Manifest("sweep", argv, cfg, out)
    t = time.perf_counter()
    report = sweep_switching_times(cfg, threads=args.threads, progress=_progress(args))
    man.time("sweep_s", time.perf_counter() - t)

    csv_path = out / "sweep.csv"
    json_path = out / "sweep.json"
    atomic_write_text(csv_path, csv_text(report.csv_rows()))
    atomic_write_text(json_path, report.dumps() + "\n")
    man.output("csv", csv_path)
    man.output("json", json_path)
    for k in report.k_values:
        path = out / f"confusion_K{k}.csv"
        atomic_write_text(path, _confusion_csv(report.confusion[k]))
        man.output(f"confusion_K{k}", path)
    man.write()
    for row in report.csv_rows():
        print(",".join(str(v) for v in row))
    return 0


def _confusion_csv(cm: np.ndarray) -> str:
    names = [p.name for p in PolicyKind]
    return csv_text([["true\\pred"] + names] + [[n] + [int(v) for v in row] for n, row in zip(names, cm)])


def cmd_confusion(args, argv) -> int:
    cfg = _resolve(args)
    cfg = replace(cfg, k_values=(args.k,)).validate()
    out = Path(args.out)
    man = _Manifest("confusion", argv, cfg, out)
    t = time.perf_counter()
    report = sweep_switching_times(cfg, threads=args.threads, progress=_progress(args))
    man.time("sweep_s", time.perf_counter() - t)
    cm = report.confusion[args.k]
    counts = out / "confusion.csv"
    per100 = out / "confusion_per100.csv"
    atomic_write_text(counts, _confusion_csv(cm))
    names = [p.name for p in PolicyKind]
    atomic_write_text(per100, csv_text([["true\\pred"] + names]
                                       + [[n] + [repr(float(v)) for v in row]
                                          for n, row in zip(names, row_normalized(cm))]))
    json_path = out / "confusion.json"
    atomic_write_text(json_path, report.dumps() + "\n")
    for role, path in (("counts", counts), ("per100", per100), ("json", json_path)):
        man.output(role, path)
    man.write()
    print(f"switching period {args.k}, {cfg.n_runs} runs, N={cfg.sim.n_users}")
    print(format_table(cm))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config JSON (defaults if omitted)")
    common.add_argument("--seed", type=_u64, help="master seed override")
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--runs", type=_positive, help="override n_runs")
    common.add_argument("--threads", type=_positive, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="jamrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="simulate a labelled trace and chunk it")
    p.add_argument("--switch-period", type=_positive)
    p.add_argument("--episode-len", type=_positive)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train a GRU on a dataset file")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--epochs", type=_positive)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden-dim", type=_positive)
    p.add_argument("--batch-size", type=_positive)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a test trace")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--trace", type=Path, help="trace CSV; simulated from the config when omitted")
    p.add_argument("--window", type=_positive)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="accuracy versus switching period")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("confusion", parents=[common], help="confusion matrix at one switching period")
    p.add_argument("--k", type=_positive, default=100)
    p.set_defaults(func=cmd_confusion)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except (ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"jamrec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled failure", exc_info=True)
        print(f"jamrec {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
