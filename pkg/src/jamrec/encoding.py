"""Occupancy-vector encoding, training chunks and test windows.

A slot becomes a ``2L + 1`` vector: user occupancy in ``[0, L)``, jammer
occupancy in ``[L, 2L)`` and the policy code in the last element.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sim import N_POLICIES, PolicyKind, SlotRecord


class EncodingError(ValueError):
    pass


class InsufficientHistoryError(ValueError):
    pass


def encode_slot(record: SlotRecord, n_channels: int) -> np.ndarray:
    vec = np.zeros(2 * n_channels + 1, dtype=np.int8)
    for offset, channels in ((0, record.user_channels), (n_channels, record.jammer_channels)):
        for c in channels:
            if not 0 <= c < n_channels:
                raise EncodingError(f"slot {record.t}: channel {c} outside [0, {n_channels})")
            vec[offset + c] = 1
    vec[2 * n_channels] = int(record.label)
    return vec


def decode_slot(vec: np.ndarray, n_channels: int, t: int = 0) -> SlotRecord:
    vec = np.asarray(vec)
    if vec.shape != (2 * n_channels + 1,):
        raise EncodingError(f"expected a vector of length {2 * n_channels + 1}, got shape {vec.shape}")
    users = frozenset(int(i) for i in np.flatnonzero(vec[:n_channels]))
    jammer = frozenset(int(i) for i in np.flatnonzero(vec[n_channels:2 * n_channels]))
    return SlotRecord(t, users, jammer, PolicyKind(int(vec[2 * n_channels])))


def encode_trace(trace: Sequence[SlotRecord], n_channels: int) -> np.ndarray:
    """Stack the slot vectors of a trace into a ``(T, 2L + 1)`` int8 matrix."""
    if len(trace) == 0:
        return np.zeros((0, 2 * n_channels + 1), dtype=np.int8)
    return np.stack([encode_slot(r, n_channels) for r in trace])


def _as_matrix(trace, n_channels: int | None) -> np.ndarray:
    if isinstance(trace, np.ndarray):
        if trace.ndim != 2 or trace.shape[1] % 2 != 1:
            raise EncodingError(f"encoded trace must be (T, 2L+1), got shape {trace.shape}")
        return trace
    if n_channels is None:
        raise EncodingError("n_channels is required when passing SlotRecords")
    return encode_trace(trace, n_channels)


@dataclass
class TrainingChunks:
    """``inputs`` is ``(n, P, 2L)`` float64, ``targets`` is ``(n, P)`` int64."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.targets.shape != self.inputs.shape[:2]:
            raise EncodingError(
                f"inputs {self.inputs.shape} and targets {self.targets.shape} disagree")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, idx):
        return self.inputs[idx], self.targets[idx]

    @property
    def chunk_len(self) -> int:
        return self.inputs.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[2]

    @classmethod
    def concat(cls, parts: Sequence["TrainingChunks"]) -> "TrainingChunks":
        return cls(np.concatenate([p.inputs for p in parts]),
                   np.concatenate([p.targets for p in parts]))


def make_training_chunks(trace, chunk_len: int, n_channels: int | None = None,
                         stride: int | None = None) -> TrainingChunks:
    """Cut one trace into fixed-length chunks of consecutive slots.

    ``stride`` defaults to ``chunk_len`` (non-overlapping; the trailing
    ``T mod P`` slots are dropped). Pass several traces through separate calls
    and join them with :meth:`TrainingChunks.concat` so chunks never straddle
    trace boundaries.
    """
    mat = _as_matrix(trace, n_channels)
    T = mat.shape[0]
    if chunk_len < 1 or chunk_len > T:
        raise ValueError(f"chunk_len={chunk_len} must be in [1, {T}]")
    stride = chunk_len if stride is None else stride
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    starts = np.arange(0, T - chunk_len + 1, stride)
    idx = starts[:, None] + np.arange(chunk_len)[None, :]
    rows = mat[idx]
    return TrainingChunks(rows[..., :-1].astype(np.float64), rows[..., -1].astype(np.int64))


def test_window(trace, t: int, window_len: int, n_channels: int | None = None) -> np.ndarray:
    """Rows ``t - C + 1 .. t`` of the trace with the label column stripped, ``(C, 2L)``."""
    if window_len < 1:
        raise ValueError(f"window_len must be positive, got {window_len}")
    if t < window_len - 1:
        raise InsufficientHistoryError(f"slot {t} has fewer than {window_len} slots of history")
    if isinstance(trace, np.ndarray):
        mat = _as_matrix(trace, n_channels)
        if t >= mat.shape[0]:
            raise IndexError(f"slot {t} beyond trace of length {mat.shape[0]}")
        rows = mat[t - window_len + 1:t + 1]
    else:
        if t >= len(trace):
            raise IndexError(f"slot {t} beyond trace of length {len(trace)}")
        rows = encode_trace(trace[t - window_len + 1:t + 1], n_channels)
    return rows[:, :-1].astype(np.float64)


test_window.__test__ = False  # keep pytest from collecting it


def sliding_windows(encoded: np.ndarray, window_len: int) -> np.ndarray:
    """All test windows of an encoded trace stacked as ``(T - C + 1, C, 2L)``.

    Row ``i`` is the window ending at slot ``i + C - 1``.
    """
    mat = _as_matrix(encoded, None)
    if mat.shape[0] < window_len:
        raise InsufficientHistoryError(
            f"trace of length {mat.shape[0]} is shorter than the window {window_len}")
    views = np.lib.stride_tricks.sliding_window_view(mat[:, :-1], window_len, axis=0)
    return np.ascontiguousarray(views.transpose(0, 2, 1), dtype=np.float64)


def labels_of(encoded: np.ndarray) -> np.ndarray:
    labels = encoded[:, -1].astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= N_POLICIES):
        raise EncodingError("label column holds codes outside 0..4")
    return labels
