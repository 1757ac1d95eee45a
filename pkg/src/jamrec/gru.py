"""Single-layer GRU with a dense softmax head, written against numpy.

Row-vector convention: a gate pre-activation is ``x @ W_x + h @ W_h + b`` with
``W_x`` of shape ``(input_dim, H)`` and ``W_h`` of shape ``(H, H)``. Sequences
are handled in batches of shape ``(batch, steps, input_dim)``; a lone
``(steps, input_dim)`` sequence is treated as a batch of one.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, fields

import numpy as np

N_CLASSES = 5
PROB_FLOOR = 1e-12


class StaleCacheError(RuntimeError):
    """Backward pass called with activations from different parameters."""


@dataclass
class GruParams:
    W_xr: np.ndarray
    W_xz: np.ndarray
    W_xh: np.ndarray
    W_hr: np.ndarray
    W_hz: np.ndarray
    W_hh: np.ndarray
    b_r: np.ndarray
    b_z: np.ndarray
    b_h: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        D, H = self.W_xr.shape
        C = self.b_out.shape[0]
        expected = self.shapes(D, H, C)
        for name, arr in self.items():
            if arr.shape != expected[name]:
                raise ValueError(f"{name} has shape {arr.shape}, expected {expected[name]}")

    @staticmethod
    def shapes(input_dim: int, hidden_dim: int, n_classes: int = N_CLASSES) -> dict[str, tuple]:
        D, H = input_dim, hidden_dim
        return {
            "W_xr": (D, H), "W_xz": (D, H), "W_xh": (D, H),
            "W_hr": (H, H), "W_hz": (H, H), "W_hh": (H, H),
            "b_r": (H,), "b_z": (H,), "b_h": (H,),
            "W_out": (H, n_classes), "b_out": (n_classes,),
        }

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def items(self):
        return [(name, getattr(self, name)) for name in self.names()]

    @property
    def input_dim(self) -> int:
        return self.W_xr.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W_xr.shape[1]

    @property
    def n_classes(self) -> int:
        return self.b_out.shape[0]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, n_classes: int = N_CLASSES) -> "GruParams":
        return cls(**{k: np.zeros(s) for k, s in cls.shapes(input_dim, hidden_dim, n_classes).items()})

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator,
             scale: float | None = None, n_classes: int = N_CLASSES) -> "GruParams":
        """Weights uniform in ``[-s, s]`` with ``s = 1/sqrt(H)`` by default, biases zero."""
        s = 1.0 / np.sqrt(hidden_dim) if scale is None else scale
        arrays = {}
        for name, shape in cls.shapes(input_dim, hidden_dim, n_classes).items():
            arrays[name] = rng.uniform(-s, s, size=shape) if name.startswith("W") else np.zeros(shape)
        return cls(**arrays)

    def zeros_like(self) -> "GruParams":
        return GruParams(**{k: np.zeros_like(v) for k, v in self.items()})

    def copy(self) -> "GruParams":
        return GruParams(**{k: v.copy() for k, v in self.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for _, v in self.items())

    def fingerprint(self) -> int:
        crc = 0
        for _, v in self.items():
            crc = zlib.crc32(np.ascontiguousarray(v).tobytes(), crc)
        return crc


def sigmoid(a: np.ndarray) -> np.ndarray:
    # tanh form cannot overflow for large |a|
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class GruStepTrace:
    r: np.ndarray
    z: np.ndarray
    h_tilde: np.ndarray
    h: np.ndarray
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite values")


def gru_cell_forward(x: np.ndarray, h_prev: np.ndarray, params: GruParams) -> GruStepTrace:
    """One GRU step for a vector (or a batch of row vectors)."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input has size {x.shape[-1]}, network expects {params.input_dim}")
    if h_prev.shape[-1] != params.hidden_dim:
        raise ValueError(f"hidden state has size {h_prev.shape[-1]}, network expects {params.hidden_dim}")
    _check_finite("x", x)
    _check_finite("h_prev", h_prev)
    r = sigmoid(x @ params.W_xr + h_prev @ params.W_hr + params.b_r)
    z = sigmoid(x @ params.W_xz + h_prev @ params.W_hz + params.b_z)
    h_tilde = np.tanh(x @ params.W_xh + (r * h_prev) @ params.W_hh + params.b_h)
    h = z * h_prev + (1.0 - z) * h_tilde
    return GruStepTrace(r, z, h_tilde, h)


def head_forward(h: np.ndarray, params: GruParams) -> tuple[np.ndarray, np.ndarray]:
    logits = h @ params.W_out + params.b_out
    return logits, softmax(logits)


@dataclass
class SequenceCache:
    """Activations of :func:`forward_sequence`, each ``(batch, steps, ...)``."""

    x: np.ndarray
    h_prev: np.ndarray
    r: np.ndarray
    z: np.ndarray
    h_tilde: np.ndarray
    h: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    fingerprint: int

    def step(self, t: int, b: int = 0) -> GruStepTrace:
        return GruStepTrace(self.r[b, t], self.z[b, t], self.h_tilde[b, t], self.h[b, t],
                            self.logits[b, t], self.probs[b, t])


def _as_batch(inputs: np.ndarray) -> tuple[np.ndarray, bool]:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        return inputs[None], True
    if inputs.ndim != 3:
        raise ValueError(f"inputs must be (steps, dim) or (batch, steps, dim), got {inputs.shape}")
    return inputs, False


def forward_sequence(inputs: np.ndarray, params: GruParams, h0: np.ndarray | None = None
                     ) -> tuple[np.ndarray, SequenceCache]:
    """Run the GRU and head over every step.

    Returns per-step class probabilities shaped like the input minus its last
    axis plus ``n_classes`` (``(steps, 5)`` or ``(batch, steps, 5)``) and the
    activation cache for :func:`backward_bptt`.
    """
    x, single = _as_batch(inputs)
    B, P, D = x.shape
    if P == 0:
        raise ValueError("cannot run an empty sequence")
    if D != params.input_dim:
        raise ValueError(f"input has size {D}, network expects {params.input_dim}")
    _check_finite("inputs", x)
    H = params.hidden_dim
    h = np.zeros((B, H)) if h0 is None else np.broadcast_to(np.asarray(h0, np.float64), (B, H)).copy()

    # input projections for all steps at once
    xr = x @ params.W_xr + params.b_r
    xz = x @ params.W_xz + params.b_z
    xh = x @ params.W_xh + params.b_h
    h_prev_all = np.empty((B, P, H))
    r_all = np.empty((B, P, H))
    z_all = np.empty((B, P, H))
    ht_all = np.empty((B, P, H))
    h_all = np.empty((B, P, H))
    for t in range(P):
        h_prev_all[:, t] = h
        r = sigmoid(xr[:, t] + h @ params.W_hr)
        z = sigmoid(xz[:, t] + h @ params.W_hz)
        ht = np.tanh(xh[:, t] + (r * h) @ params.W_hh)
        h = z * h + (1.0 - z) * ht
        r_all[:, t], z_all[:, t], ht_all[:, t], h_all[:, t] = r, z, ht, h
    logits, probs = head_forward(h_all, params)
    cache = SequenceCache(x, h_prev_all, r_all, z_all, ht_all, h_all, logits, probs,
                          params.fingerprint())
    return (probs[0] if single else probs), cache


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean of ``-ln p[target]`` over all steps (and batch entries)."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets)
    if probs.shape[:-1] != targets.shape:
        raise ValueError(f"predictions {probs.shape[:-1]} and targets {targets.shape} differ in length")
    if targets.size == 0:
        raise ValueError("cannot average the loss over zero steps")
    if targets.min() < 0 or targets.max() >= probs.shape[-1]:
        raise ValueError("target codes out of range")
    p = np.take_along_axis(probs, targets[..., None].astype(np.int64), axis=-1)[..., 0]
    return float(np.mean(-np.log(np.maximum(p, PROB_FLOOR))))


def backward_bptt(cache: SequenceCache, targets: np.ndarray, params: GruParams) -> GruParams:
    """Gradient of :func:`cross_entropy` (mean over all steps) w.r.t. every parameter."""
    if cache.fingerprint != params.fingerprint():
        raise StaleCacheError("activation cache was produced with different parameter values")
    B, P, _ = cache.x.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size != B * P:
        raise ValueError(f"expected {B * P} targets for a cache of shape {(B, P)}")
    targets = targets.reshape(B, P)

    grads = params.zeros_like()
    n = B * P
    dlogits = cache.probs.copy()
    bi, ti = np.indices((B, P))
    dlogits[bi, ti, targets] -= 1.0
    dlogits /= n
    H = params.hidden_dim
    grads.W_out = cache.h.reshape(n, H).T @ dlogits.reshape(n, -1)
    grads.b_out = dlogits.sum(axis=(0, 1))
    dh_out = dlogits @ params.W_out.T  # (B, P, H)

    da_r = np.empty((B, P, H))
    da_z = np.empty((B, P, H))
    da_h = np.empty((B, P, H))
    rh = cache.r * cache.h_prev
    dh_next = np.zeros((B, H))
    for t in range(P - 1, -1, -1):
        dh = dh_out[:, t] + dh_next
        z, r, ht, hp = cache.z[:, t], cache.r[:, t], cache.h_tilde[:, t], cache.h_prev[:, t]
        dz = dh * (hp - ht)
        dah = dh * (1.0 - z) * (1.0 - ht * ht)
        drh = dah @ params.W_hh.T
        daz = dz * z * (1.0 - z)
        dar = drh * hp * r * (1.0 - r)
        dh_next = dh * z + drh * r + daz @ params.W_hz.T + dar @ params.W_hr.T
        da_r[:, t], da_z[:, t], da_h[:, t] = dar, daz, dah

    x2 = cache.x.reshape(n, -1)
    hp2 = cache.h_prev.reshape(n, H)
    for gate, da, h_in in (("r", da_r, hp2), ("z", da_z, hp2), ("h", da_h, rh.reshape(n, H))):
        da2 = da.reshape(n, H)
        setattr(grads, f"W_x{gate}", x2.T @ da2)
        setattr(grads, f"W_h{gate}", h_in.T @ da2)
        setattr(grads, f"b_{gate}", da2.sum(axis=0))
    return grads


def loss_and_grads(inputs: np.ndarray, targets: np.ndarray, params: GruParams
                   ) -> tuple[float, GruParams]:
    probs, cache = forward_sequence(inputs, params)
    return cross_entropy(probs, targets), backward_bptt(cache, targets, params)


def final_probs(windows: np.ndarray, params: GruParams) -> np.ndarray:
    """Class distribution at the last step of each window, starting from a zero state."""
    probs, _ = forward_sequence(windows, params)
    return probs[..., -1, :]


def predict_codes(windows: np.ndarray, params: GruParams) -> np.ndarray:
    """Argmax of the final-step distribution; ``np.argmax`` resolves ties to the lowest code."""
    return np.argmax(final_probs(windows, params), axis=-1)
