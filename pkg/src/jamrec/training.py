"""Mini-batch training loop and policy prediction."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .encoding import TrainingChunks
from .gru import GruParams, backward_bptt, cross_entropy, final_probs, forward_sequence
from .optim import make_optimizer, optimizer_step
from .sim import ConfigError, PolicyKind

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    hidden_dim: int = 64
    learning_rate: float = 1e-2
    batch_size: int = 32
    epochs: int = 5
    optimizer: str = "adam"
    init_scale: float | None = None  # None -> 1/sqrt(hidden_dim)
    seed: int = 0

    def validate(self) -> "Hyperparams":
        for name in ("hidden_dim", "batch_size", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.init_scale is not None and not self.init_scale > 0:
            raise ConfigError("init_scale must be positive")
        if self.optimizer.lower() not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: GruParams
    loss_history: list[float]
    train_accuracy: float


def train(dataset: TrainingChunks, hyper: Hyperparams, params: GruParams | None = None) -> TrainResult:
    """Fit a GRU classifier to per-step chunk targets.

    Every chunk starts from a zero hidden state. Chunks are shuffled each epoch
    with a generator seeded from ``hyper.seed``, which also draws the initial
    weights, so two calls with equal inputs return identical parameters.
    """
    hyper.validate()
    if len(dataset) == 0:
        raise ValueError("training set is empty")
    rng = np.random.Generator(np.random.PCG64(hyper.seed))
    if params is None:
        params = GruParams.init(dataset.input_dim, hyper.hidden_dim, rng, hyper.init_scale)
    opt = make_optimizer(hyper.optimizer, hyper.learning_rate)

    history: list[float] = []
    n = len(dataset)
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            x, y = dataset[idx]
            probs, cache = forward_sequence(x, params)
            loss = cross_entropy(probs, y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}; try a lower learning rate")
            optimizer_step(params, backward_bptt(cache, y, params), opt)
            total += loss * len(idx)
            seen += len(idx)
        history.append(total / seen)
        log.debug("epoch %d loss %.5f", epoch, history[-1])
    if not params.is_finite():
        raise TrainingDivergedError("parameters became non-finite during training")

    probs, _ = forward_sequence(dataset.inputs, params)
    acc = float(np.mean(np.argmax(probs, axis=-1) == dataset.targets))
    return TrainResult(params, history, acc)


def predict_policy(window: np.ndarray, params: GruParams) -> PolicyKind:
    """Policy with the highest final-step probability (lowest code on ties)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] < 1:
        raise ValueError(f"window must be (C, 2L) with C >= 1, got {window.shape}")
    return PolicyKind(int(np.argmax(final_probs(window, params))))
