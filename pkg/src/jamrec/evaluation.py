"""Train/test experiments over jammer switching periods.

Each (K, run) pair trains its own model on a fresh training episode and scores
it on a fresh test episode. Seeds for a pair come from
``SeedSequence(master_seed, spawn_key=(K, run))`` so results do not depend on
which other periods are swept or on worker scheduling.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from .config import ExperimentConfig
from .encoding import encode_trace, labels_of, make_training_chunks, sliding_windows
from .gru import GruParams, predict_codes
from .sim import N_POLICIES, PolicyKind, run_episode
from .training import train

log = logging.getLogger(__name__)

Predictor = Union[GruParams, Callable[[np.ndarray], np.ndarray]]


def evaluate_run(predictor: Predictor, trace, window_len: int,
                 n_channels: int | None = None) -> np.ndarray:
    """Score every slot that has a full window of history.

    ``trace`` is a list of SlotRecords or an encoded ``(T, 2L+1)`` matrix.
    ``predictor`` is trained parameters or any callable mapping a stack of
    windows ``(n, C, 2L)`` to class codes. Returns ``(n, 2)`` int pairs
    ``(true, predicted)`` in slot order, for slots ``C-1 .. T-1``.
    """
    encoded = trace if isinstance(trace, np.ndarray) else encode_trace(trace, n_channels)
    if encoded.shape[0] < window_len:
        raise ValueError(f"test trace of {encoded.shape[0]} slots is shorter than the window {window_len}")
    windows = sliding_windows(encoded, window_len)
    truth = labels_of(encoded)[window_len - 1:]
    if isinstance(predictor, GruParams):
        pred = predict_codes(windows, predictor)
    else:
        pred = np.asarray(predictor(windows), dtype=np.int64)
    return np.stack([truth, pred], axis=1).astype(np.int64)


def accuracy(pairs: np.ndarray) -> float:
    pairs = np.asarray(pairs)
    if pairs.size == 0:
        raise ValueError("accuracy of zero predictions is undefined")
    return float(np.mean(pairs[:, 0] == pairs[:, 1]))


def confusion_matrix(pairs: np.ndarray, n_classes: int = N_POLICIES) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n_classes):
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (pairs[:, 0], pairs[:, 1]), 1)
    return cm


def per_policy_accuracy(confusion: np.ndarray) -> np.ndarray:
    """Diagonal over row sums; NaN for classes that never occurred."""
    confusion = np.asarray(confusion, dtype=np.float64)
    rows = confusion.sum(axis=1)
    out = np.full(confusion.shape[0], np.nan)
    seen = rows > 0
    out[seen] = np.diag(confusion)[seen] / rows[seen]
    return out


def row_normalized(confusion: np.ndarray, scale: float = 100.0) -> np.ndarray:
    """Rows rescaled to sum to ``scale`` (the layout of the published table)."""
    confusion = np.asarray(confusion, dtype=np.float64)
    rows = confusion.sum(axis=1, keepdims=True)
    return np.divide(confusion * scale, rows, out=np.zeros_like(confusion), where=rows > 0)


def run_seeds(master_seed: int, switch_period: int, run: int) -> tuple[int, int, int]:
    """(training episode, test episode, model) seeds for one run."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(switch_period), int(run)))
    return tuple(int(child.generate_state(1, np.uint64)[0]) for child in ss.spawn(3))


@dataclass
class RunResult:
    switch_period: int
    run: int
    confusion: np.ndarray
    final_loss: float

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())


def run_one(config: ExperimentConfig, switch_period: int, run: int) -> RunResult:
    """Simulate, train and evaluate a single model."""
    train_seed, test_seed, model_seed = run_seeds(config.seed, switch_period, run)
    L = config.sim.n_channels
    train_cfg = replace(config.sim, switch_period=switch_period, seed=train_seed)
    test_cfg = replace(train_cfg, episode_len=config.test_len, seed=test_seed)
    chunks = make_training_chunks(encode_trace(run_episode(train_cfg), L),
                                  config.chunk_len, stride=config.chunk_stride)
    try:
        result = train(chunks, replace(config.hyper, seed=model_seed))
    except Exception as exc:
        raise RuntimeError(f"training failed for K={switch_period}, run={run}: {exc}") from exc
    pairs = evaluate_run(result.params, encode_trace(run_episode(test_cfg), L), config.window_len)
    return RunResult(switch_period, run, confusion_matrix(pairs), result.loss_history[-1])


def _run_task(args):
    config, k, run = args
    return run_one(config, k, run)


@dataclass
class EvalReport:
    k_values: list[int]
    n_runs: int
    accuracy_mean: dict[int, float]
    accuracy_std: dict[int, float]
    per_policy: dict[int, list[float]]
    confusion: dict[int, np.ndarray]  # pooled over runs
    run_accuracy: dict[int, list[float]] = field(default_factory=dict)
    run_confusion: dict[int, list[np.ndarray]] = field(default_factory=dict)

    @classmethod
    def from_runs(cls, results: list[RunResult], k_values, n_runs: int) -> "EvalReport":
        by_k: dict[int, list[RunResult]] = {int(k): [] for k in k_values}
        for res in results:
            by_k[res.switch_period].append(res)
        mean, std, per_policy, pooled, run_acc, run_cm = {}, {}, {}, {}, {}, {}
        for k, runs in by_k.items():
            runs.sort(key=lambda r: r.run)
            accs = np.array([r.accuracy for r in runs])
            mean[k] = float(accs.mean())
            std[k] = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
            pooled[k] = np.sum([r.confusion for r in runs], axis=0)
            per_policy[k] = per_policy_accuracy(pooled[k]).tolist()
            run_acc[k] = accs.tolist()
            run_cm[k] = [r.confusion for r in runs]
        return cls([int(k) for k in k_values], n_runs, mean, std, per_policy, pooled, run_acc, run_cm)

    def csv_rows(self) -> list[list]:
        header = ["K", "accuracy_mean", "accuracy_std"] + [f"acc_{p.name}" for p in PolicyKind]
        rows = [header]
        for k in self.k_values:
            rows.append([k, repr(self.accuracy_mean[k]), repr(self.accuracy_std[k])]
                        + [repr(v) for v in self.per_policy[k]])
        return rows

    def to_json(self) -> dict:
        def nan_to_none(values):
            return [None if np.isnan(v) else v for v in values]
        return {
            "k_values": self.k_values,
            "n_runs": self.n_runs,
            "policies": [p.name for p in PolicyKind],
            "results": {
                str(k): {
                    "accuracy_mean": self.accuracy_mean[k],
                    "accuracy_std": self.accuracy_std[k],
                    "per_policy_accuracy": nan_to_none(self.per_policy[k]),
                    "confusion": self.confusion[k].tolist(),
                    "confusion_per_100": row_normalized(self.confusion[k]).tolist(),
                    "run_accuracy": self.run_accuracy.get(k, []),
                    "run_confusion": [c.tolist() for c in self.run_confusion.get(k, [])],
                }
                for k in self.k_values
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "EvalReport":
        res = data["results"]
        ks = [int(k) for k in data["k_values"]]
        return cls(
            ks, int(data["n_runs"]),
            {k: res[str(k)]["accuracy_mean"] for k in ks},
            {k: res[str(k)]["accuracy_std"] for k in ks},
            {k: [np.nan if v is None else v for v in res[str(k)]["per_policy_accuracy"]] for k in ks},
            {k: np.array(res[str(k)]["confusion"], dtype=np.int64) for k in ks},
            {k: res[str(k)]["run_accuracy"] for k in ks},
            {k: [np.array(c, dtype=np.int64) for c in res[str(k)]["run_confusion"]] for k in ks},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def sweep_switching_times(config: ExperimentConfig, threads: int = 1,
                          progress: Callable[[RunResult], None] | None = None) -> EvalReport:
    """Train and evaluate ``n_runs`` models for every K in ``config.k_values``."""
    config.validate()
    tasks = [(config, int(k), run) for k in config.k_values for run in range(config.n_runs)]
    results: list[RunResult] = []
    if threads <= 1:
        for task in tasks:
            results.append(_run_task(task))
            if progress:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(_run_task, tasks):
                results.append(res)
                if progress:
                    progress(res)
    return EvalReport.from_runs(results, config.k_values, config.n_runs)

