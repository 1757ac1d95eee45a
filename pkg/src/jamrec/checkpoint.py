"""Versioned checkpoint container for trained GRU parameters.

Layout (little-endian)::

    8 bytes   magic b"JAMRECCK"
    4 bytes   uint32 header length n
    n bytes   UTF-8 JSON header: format_version, input_dim, hidden_dim,
              n_classes, hyperparams, tensors [[name, shape], ...]
    float64 payload: every tensor flattened in C order, in header order
                     (W_xr W_xz W_xh W_hr W_hz W_hh b_r b_z b_h W_out b_out)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .gru import GruParams
from .io import FormatError, atomic_write_bytes
from .training import Hyperparams

MAGIC = b"JAMRECCK"
FORMAT_VERSION = 1


def checkpoint_bytes(params: GruParams, hyper: Hyperparams) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "n_classes": params.n_classes,
        "hyperparams": hyper.to_dict(),
        "tensors": [[name, list(arr.shape)] for name, arr in params.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in params.items())
    return MAGIC + struct.pack("<I", len(blob)) + blob + payload


def save_checkpoint(params: GruParams, hyper: Hyperparams, path: str | Path) -> None:
    atomic_write_bytes(path, checkpoint_bytes(params, hyper))


def load_checkpoint(path: str | Path) -> tuple[GruParams, Hyperparams]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic header)")
    (hlen,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12:12 + hlen])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint header ({exc})") from exc
    version = header.get("format_version") if isinstance(header, dict) else None
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: checkpoint format version {version!r}, expected {FORMAT_VERSION}")
    names = GruParams.names()
    tensors = header.get("tensors", [])
    if [t[0] for t in tensors] != names:
        raise FormatError(f"{path}: unexpected tensor list {[t[0] for t in tensors]}")
    payload = memoryview(data)[12 + hlen:]
    arrays, offset = {}, 0
    for name, shape in tensors:
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = 8 * count
        if offset + nbytes > len(payload):
            raise FormatError(f"{path}: truncated while reading {name}")
        arrays[name] = np.frombuffer(payload[offset:offset + nbytes], dtype="<f8").astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise FormatError(f"{path}: {len(payload) - offset} trailing bytes after tensors")
    try:
        params = GruParams(**arrays)
    except ValueError as exc:
        raise FormatError(f"{path}: inconsistent tensor shapes ({exc})") from exc
    return params, Hyperparams(**header["hyperparams"])
