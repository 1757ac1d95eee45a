"""On-disk formats: trace CSV + JSON sidecar, chunk dataset files, atomic writes.

Dataset file layout (all integers little-endian)::

    8 bytes   magic b"JAMRECDS"
    4 bytes   uint32 header length n
    n bytes   UTF-8 JSON header: format_version, n_channels, n_users, chunk_len,
              chunk_stride, n_chunks, provenance {seed, config_hash, ...}
    n_chunks * chunk_len * 2L bytes   uint8 inputs, chunk-major then slot-major
    n_chunks * chunk_len bytes        uint8 targets
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .encoding import TrainingChunks
from .sim import PolicyKind, SimConfig, SlotRecord

DATASET_MAGIC = b"JAMRECDS"
DATASET_VERSION = 1
TRACE_COLUMNS = ["t", "user_channels", "jammer_channels", "label"]


class FormatError(ValueError):
    """A file is truncated, has the wrong magic bytes or an unsupported version."""


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _join(channels) -> str:
    return ";".join(str(c) for c in sorted(channels))


def _split(field: str) -> frozenset:
    return frozenset(int(c) for c in field.split(";")) if field else frozenset()


def trace_to_csv(trace: list[SlotRecord]) -> str:
    rows = [TRACE_COLUMNS]
    rows += [[r.t, _join(r.user_channels), _join(r.jammer_channels), int(r.label)] for r in trace]
    return csv_text(rows)


def write_trace(path: str | Path, trace: list[SlotRecord], config: SimConfig) -> Path:
    """Write ``path`` (CSV) and its ``.json`` sidecar holding the SimConfig."""
    path = Path(path)
    atomic_write_text(path, trace_to_csv(trace))
    sidecar = path.with_suffix(".json")
    atomic_write_json(sidecar, {"sim_config": asdict(config), "n_slots": len(trace)})
    return sidecar


def read_trace(path: str | Path) -> tuple[list[SlotRecord], SimConfig | None]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACE_COLUMNS:
            raise FormatError(f"{path}: expected header {TRACE_COLUMNS}, got {header}")
        try:
            trace = [SlotRecord(int(t), _split(u), _split(j), PolicyKind(int(lab)))
                     for t, u, j, lab in reader]
        except ValueError as exc:
            raise FormatError(f"{path}: malformed row ({exc})") from exc
    sidecar = path.with_suffix(".json")
    config = None
    if sidecar.exists():
        config = SimConfig(**json.loads(sidecar.read_text())["sim_config"])
    return trace, config


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def dataset_to_bytes(chunks: TrainingChunks, header: dict) -> bytes:
    n, P, D = chunks.inputs.shape
    head = {"format_version": DATASET_VERSION, "n_chunks": n, "chunk_len": P,
            "n_channels": D // 2, **header}
    blob = json.dumps(head, sort_keys=True).encode()
    return (DATASET_MAGIC + struct.pack("<I", len(blob)) + blob
            + chunks.inputs.astype(np.uint8).tobytes() + chunks.targets.astype(np.uint8).tobytes())


def write_dataset(path: str | Path, chunks: TrainingChunks, header: dict) -> None:
    atomic_write_bytes(path, dataset_to_bytes(chunks, header))


def read_dataset(path: str | Path) -> tuple[TrainingChunks, dict]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != DATASET_MAGIC:
        raise FormatError(f"{path}: not a dataset file (bad magic)")
    (hlen,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12:12 + hlen])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt dataset header ({exc})") from exc
    if not isinstance(header, dict) or header.get("format_version") != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {header.get('format_version')!r}"
                          if isinstance(header, dict) else f"{path}: corrupt dataset header")
    try:
        n, P, L = int(header["n_chunks"]), int(header["chunk_len"]), int(header["n_channels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: dataset header lacks shape fields ({exc})") from exc
    body = data[12 + hlen:]
    n_in, n_tg = n * P * 2 * L, n * P
    if len(body) != n_in + n_tg:
        raise FormatError(f"{path}: expected {n_in + n_tg} payload bytes, found {len(body)}")
    inputs = np.frombuffer(body[:n_in], dtype=np.uint8).reshape(n, P, 2 * L).astype(np.float64)
    targets = np.frombuffer(body[n_in:], dtype=np.uint8).reshape(n, P).astype(np.int64)
    return TrainingChunks(inputs, targets), header
