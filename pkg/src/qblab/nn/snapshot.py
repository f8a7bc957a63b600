"""Plain binary tensor snapshots.

Layout: rank as one little-endian uint64, then the extents (uint64 LE
each), then the raw little-endian float32 payload in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..imgio import atomic_write_bytes


def encode_tensor(arr: np.ndarray) -> bytes:
    # tobytes always emits row-major order; no contiguity copy needed,
    # and (unlike ascontiguousarray) rank-0 stays rank-0
    arr = np.asarray(arr).astype("<f4", copy=False)
    head = struct.pack("<Q", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    try:
        (rank,) = struct.unpack_from("<Q", buf, offset)
        offset += 8
        shape = struct.unpack_from(f"<{rank}Q", buf, offset)
        offset += 8 * rank
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
    except (struct.error, ValueError) as exc:
        raise DataError(f"truncated tensor snapshot: {exc}") from exc
    if arr.size != count:
        raise DataError("truncated tensor snapshot payload")
    return arr.reshape(shape).astype(np.float32), offset


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    atomic_write_bytes(path, encode_tensor(arr))


def read_tensor(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing tensor snapshot {path}")
    arr, _ = decode_tensor(path.read_bytes())
    return arr
