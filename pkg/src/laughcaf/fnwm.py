"""FNWM matrix files and parameter checkpoints.

An FNWM block is ``b"FNWM"``, then little-endian u32 version (1), u32 rows,
u32 cols, then rows*cols float32 values in row-major order.  A checkpoint
is several blocks back to back in one file plus a JSON index mapping each
parameter name to ``[offset, rows, cols]``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

MAGIC = b"FNWM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def encode_matrix(m) -> bytes:
    a = np.asarray(m, dtype="<f4")
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"FNWM stores 2-D matrices, got shape {a.shape}")
    return _HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1]) + np.ascontiguousarray(a).tobytes()


def decode_matrix(buf: bytes, offset: int = 0, source: str = "<buffer>") -> tuple[np.ndarray, int]:
    """Parse one block at ``offset``; returns (matrix, offset after the block)."""
    if len(buf) - offset < _HEADER.size:
        raise FormatError(f"{source}: truncated FNWM header")
    magic, version, rows, cols = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported FNWM version {version}")
    start = offset + _HEADER.size
    end = start + 4 * rows * cols
    if len(buf) < end:
        raise FormatError(f"{source}: truncated FNWM payload ({len(buf) - start} of {end - start} bytes)")
    m = np.frombuffer(buf, dtype="<f4", count=rows * cols, offset=start).reshape(rows, cols)
    return m.astype(np.float32), end


def write_matrix(path: str | Path, m) -> None:
    Path(path).write_bytes(encode_matrix(m))


def read_matrix(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError as exc:
        raise DataError(f"no such matrix file: {path}") from exc
    m, end = decode_matrix(buf, 0, str(path))
    if end != len(buf):
        raise FormatError(f"{path}: {len(buf) - end} trailing bytes after matrix")
    return m


def save_checkpoint(stem: str | Path, params: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write ``<stem>.fnwm`` and ``<stem>.json``."""
    stem = Path(stem)
    blobs = bytearray()
    index = {}
    for name, value in params.items():
        a = np.asarray(value)
        rows, cols = (1, a.shape[0]) if a.ndim == 1 else a.shape
        index[name] = [len(blobs), int(rows), int(cols), list(a.shape)]
        blobs += encode_matrix(a.reshape(rows, cols))
    stem.with_suffix(".fnwm").write_bytes(bytes(blobs))
    doc = {"index": index, "meta": meta or {}}
    stem.with_suffix(".json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_checkpoint(stem: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    stem = Path(stem)
    if stem.suffix in (".json", ".fnwm"):
        stem = stem.with_suffix("")
    try:
        doc = json.loads(stem.with_suffix(".json").read_text())
        buf = stem.with_suffix(".fnwm").read_bytes()
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint not found: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{stem}.json: invalid JSON ({exc})") from exc
    params = {}
    for name, (offset, rows, cols, shape) in doc["index"].items():
        m, _ = decode_matrix(buf, offset, f"{stem}.fnwm:{name}")
        if m.shape != (rows, cols):
            raise FormatError(f"{stem}: {name} has shape {m.shape}, index says {(rows, cols)}")
        params[name] = m.reshape(shape)
    return params, doc.get("meta", {})
