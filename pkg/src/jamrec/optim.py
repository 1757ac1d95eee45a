"""SGD and Adam over :class:`GruParams`. Both update parameters in place."""
from __future__ import annotations

import numpy as np

from .gru import GruParams


class SGD:
    def __init__(self, lr: float = 1e-3):
        self.lr = lr

    def step(self, params: GruParams, grads: GruParams) -> None:
        for name, p in params.items():
            p -= self.lr * getattr(grads, name)

    def state_dict(self) -> dict:
        return {"kind": "sgd", "lr": self.lr}


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: GruParams, grads: GruParams) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = getattr(grads, name)
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {"kind": "adam", "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "t": self.t}


def make_optimizer(kind: str, lr: float):
    kind = kind.lower()
    if kind == "adam":
        return Adam(lr)
    if kind == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {kind!r}; expected 'adam' or 'sgd'")


def optimizer_step(params: GruParams, grads: GruParams, optimizer) -> None:
    for name, p in params.items():
        if getattr(grads, name).shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {getattr(grads, name).shape}, expected {p.shape}")
    optimizer.step(params, grads)
