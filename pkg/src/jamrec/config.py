"""Experiment configuration and its JSON form.

Example document (every key optional; missing keys take the defaults below)::

    {
      "sim":   {"n_users": 2, "n_channels": 12, "switch_period": 100,
                "episode_len": 5000, "sweep_width": 3, "combat_hold": 5, "seed": 0},
      "hyper": {"hidden_dim": 64, "learning_rate": 0.01, "batch_size": 32,
                "epochs": 5, "optimizer": "adam", "init_scale": null, "seed": 0},
      "k_values": [5, 25, 45, 65, 85, 105, 125, 145, 165, 185],
      "n_runs": 100, "test_len": 2000, "window_len": 20,
      "chunk_len": 20, "chunk_stride": 1, "seed": 0
    }

``sim.switch_period`` is only used by single-episode commands; sweeps take
their periods from ``k_values``. ``seed`` is the master seed of a sweep.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .sim import ConfigError, SimConfig
from .training import Hyperparams

DEFAULT_K_VALUES = tuple(range(5, 186, 20))


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    n_runs: int = 100
    test_len: int = 2000
    window_len: int = 20
    chunk_len: int = 20
    chunk_stride: int = 1
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        self.sim.validate()
        self.hyper.validate()
        if len(self.k_values) == 0:
            raise ConfigError("k_values must not be empty")
        if any(int(k) < 1 for k in self.k_values):
            raise ConfigError("every switching period must be positive")
        for name in ("n_runs", "test_len", "window_len", "chunk_len", "chunk_stride"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.test_len < self.window_len:
            raise ConfigError(f"test_len={self.test_len} is shorter than window_len={self.window_len}")
        if self.chunk_len > self.sim.episode_len:
            raise ConfigError(f"chunk_len={self.chunk_len} exceeds episode_len={self.sim.episode_len}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_values"] = list(self.k_values)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def with_overrides(self, *, seed: int | None = None, runs: int | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, sim=replace(cfg.sim, seed=seed))
        if runs is not None:
            cfg = replace(cfg, n_runs=runs)
        return cfg.validate()


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    sim = _build(SimConfig, data.pop("sim", {}), "sim")
    hyper = _build(Hyperparams, data.pop("hyper", {}), "hyper")
    if "k_values" in data:
        data["k_values"] = tuple(int(k) for k in data["k_values"])
    try:
        cfg = _build(ExperimentConfig, {**data, "sim": sim, "hyper": hyper}, "config")
    except TypeError as exc:  # pragma: no cover
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)
