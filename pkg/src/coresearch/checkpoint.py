"""Versioned binary persistence for named float64 tensors.

Layout (all integers little-endian):

    magic          8 bytes  b"CORESRCH"
    version        u32      currently 1
    id count       u32      entries in the optional id table (0 when unused)
    per id:        u32 byte length, then UTF-8 bytes
    tensor count   u32
    per tensor:    u32 name byte length, UTF-8 name,
                   u32 ndim, ndim x u64 dims,
                   row-major float64 data

The id table carries the passage-id ordering for persisted dense indexes;
parameter checkpoints leave it empty.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import FormatError

MAGIC = b"CORESRCH"
VERSION = 1


def _write_str(fh: BinaryIO, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise FormatError(f"truncated file: wanted {n} bytes, got {len(raw)}")
    return raw


def _read_str(fh: BinaryIO) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n).decode("utf-8")


def save_checkpoint(
    path: str | Path,
    tensors: dict[str, np.ndarray],
    ids: tuple[str, ...] | list[str] = (),
) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(ids)))
        for pid in ids:
            _write_str(fh, pid)
        fh.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            arr = np.asarray(tensor, dtype=np.float64)
            _write_str(fh, name)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], list[str]]:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 8)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        (id_count,) = struct.unpack("<I", _read_exact(fh, 4))
        ids = [_read_str(fh) for _ in range(id_count)]
        (tensor_count,) = struct.unpack("<I", _read_exact(fh, 4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(tensor_count):
            name = _read_str(fh)
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = tuple(
                struct.unpack("<Q", _read_exact(fh, 8))[0] for _ in range(ndim)
            )
            count = 1
            for dim in shape:
                count *= dim
            data = np.frombuffer(_read_exact(fh, count * 8), dtype="<f8")
            tensors[name] = data.reshape(shape).astype(np.float64)
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after final tensor")
    return tensors, ids
