"""Binary model checkpoints.

Layout (all integers little-endian)::

    b"CRAE"               magic
    u32                   format version
    u32                   number of tensors
    per tensor:           u16 name length, u32 ndim, name (utf-8), u64 dims...
    u64                   metadata length, then utf-8 JSON metadata
    tensors               contiguous float64, in table order, C order
    u64                   CRC-64/XZ of every preceding byte
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numba
import numpy as np

MAGIC = b"CRAE"
FORMAT_VERSION = 1

_POLY = 0xC96C5795D7870F42  # ECMA-182, reflected


def _make_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint64)
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ _POLY if crc & 1 else crc >> 1
        table[i] = crc
    return table


_TABLE = _make_table()


@numba.njit(cache=True)
def _crc_update(crc, data, table):
    for byte in data:
        crc = table[(crc ^ np.uint64(byte)) & np.uint64(0xFF)] ^ (crc >> np.uint64(8))
    return crc


def crc64(data: bytes) -> int:
    """CRC-64/XZ (``crc64(b"123456789") == 0x995DC9BBDF1939FA``)."""
    buf = np.frombuffer(data, dtype=np.uint8)
    crc = _crc_update(np.uint64(0xFFFFFFFFFFFFFFFF), buf, _TABLE)
    return int(crc) ^ 0xFFFFFFFFFFFFFFFF


class CheckpointError(ValueError):
    """Unreadable, truncated, corrupted or version-mismatched checkpoint."""


def write_tensors(path: str | Path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<HI", len(raw), arr.ndim) + raw)
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts.append(struct.pack("<Q", len(blob)) + blob)
    for arr in tensors.values():
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    payload = body + struct.pack("<Q", crc64(body))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def read_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if len(data) < 20 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a CRAE checkpoint")
    body, (stored,) = data[:-8], struct.unpack("<Q", data[-8:])
    if crc64(body) != stored:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupted)")
    version, n = struct.unpack_from("<II", body, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    off = 12
    table = []
    for _ in range(n):
        name_len, ndim = struct.unpack_from("<HI", body, off)
        off += 6
        name = body[off:off + name_len].decode("utf-8")
        off += name_len
        shape = struct.unpack_from(f"<{ndim}Q", body, off)
        off += 8 * ndim
        table.append((name, shape))
    (meta_len,) = struct.unpack_from("<Q", body, off)
    off += 8
    meta = json.loads(body[off:off + meta_len].decode("utf-8"))
    off += meta_len
    tensors = {}
    for name, shape in table:
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64)
        off += 8 * count
    if off != len(body):
        raise CheckpointError(f"{path}: trailing bytes after tensor block")
    return tensors, meta
