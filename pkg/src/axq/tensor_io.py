"""AXT binary tensor files.

Layout: magic "AXT1" (4 bytes), u32 little-endian rank, rank x u64
little-endian dims, u8 dtype code (1=f32, 2=f64, 3=i32, 4=i8), then the
row-major little-endian payload. Trivially parseable from any language.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["TensorFormatError", "write_tensor", "read_tensor"]

MAGIC = b"AXT1"

_CODE_TO_DTYPE = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<i4"),
    4: np.dtype("|i1"),
}
_KIND_TO_CODE = {("f", 4): 1, ("f", 8): 2, ("i", 4): 3, ("i", 1): 4}


class TensorFormatError(ValueError):
    """Malformed AXT file (bad magic, unknown dtype, or truncation)."""


def _storage_dtype(arr: np.ndarray) -> tuple[int, np.dtype]:
    code = _KIND_TO_CODE.get((arr.dtype.kind, arr.dtype.itemsize))
    if code is not None:
        return code, _CODE_TO_DTYPE[code]
    if arr.dtype.kind == "i":  # e.g. int64 codes: store as i32 when they fit
        info = np.iinfo(np.int32)
        if arr.size and (arr.min() < info.min or arr.max() > info.max):
            raise TensorFormatError("integer values exceed the i32 storage range")
        return 3, _CODE_TO_DTYPE[3]
    if arr.dtype.kind == "f":
        return 2, _CODE_TO_DTYPE[2]
    raise TensorFormatError(f"unsupported array dtype: {arr.dtype}")


def write_tensor(path, arr) -> None:
    arr = np.asarray(arr)
    code, dtype = _storage_dtype(arr)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(struct.pack("<B", code))
        fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic, not an AXT file")
    offset = 4
    if len(data) < offset + 4:
        raise TensorFormatError(f"{path}: truncated header (missing rank)")
    (rank,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if len(data) < offset + 8 * rank:
        raise TensorFormatError(f"{path}: truncated header (missing dims)")
    dims = struct.unpack_from(f"<{rank}Q", data, offset)
    offset += 8 * rank
    if len(data) < offset + 1:
        raise TensorFormatError(f"{path}: truncated header (missing dtype code)")
    (code,) = struct.unpack_from("<B", data, offset)
    offset += 1
    dtype = _CODE_TO_DTYPE.get(code)
    if dtype is None:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    count = 1
    for d in dims:
        count *= d
    expected = count * dtype.itemsize
    if len(data) - offset != expected:
        raise TensorFormatError(
            f"{path}: truncated payload ({len(data) - offset} bytes, expected {expected})"
        )
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return arr.reshape(dims).copy()
