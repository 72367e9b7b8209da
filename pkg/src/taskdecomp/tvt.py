"""TVT1 tensor files.

Layout (all integers little-endian)::

    b"TVT1"
    repeated per tensor:
        u32 name_len, name (utf-8), u32 ndim, u64 dims[ndim], u8 dtype (0 = f64),
        payload: prod(dims) little-endian f64, row-major
    u64 tensor_count
    u32 crc32 of every preceding byte
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import Dict, Iterable, Mapping, Tuple, Union

import numpy as np

from .errors import BadMagic, ChecksumMismatch, DuplicateName, Truncated, UnsupportedDtype

MAGIC = b"TVT1"
DTYPE_F64 = 0
_TRAILER = 12  # u64 count + u32 crc


def encode(tensors: Union[Mapping[str, np.ndarray], Iterable[Tuple[str, np.ndarray]]]) -> bytes:
    items = list(tensors.items()) if isinstance(tensors, Mapping) else list(tensors)
    seen = set()
    parts = [MAGIC]
    for name, arr in items:
        if name in seen:
            raise DuplicateName(f"duplicate tensor name {name!r}")
        seen.add(name)
        a = np.asarray(arr, dtype="<f8")  # ascontiguousarray would promote 0-d to 1-d
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(struct.pack("<B", DTYPE_F64))
        parts.append(a.tobytes(order="C"))
    parts.append(struct.pack("<Q", len(items)))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def _walk(data: bytes, end: int):
    """Yield (name, shape, payload_offset) for each entry in data[4:end]."""
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > end:
            raise Truncated(f"entry runs past end of data at offset {pos}")
        chunk = data[pos: pos + n]
        pos += n
        return chunk

    while pos < end:
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        (dtype,) = struct.unpack("<B", take(1))
        if dtype != DTYPE_F64:
            raise UnsupportedDtype(f"tensor {name!r} has dtype tag {dtype}")
        count = int(np.prod(shape, dtype=np.uint64)) if ndim else 1
        offset = pos
        take(8 * count)
        yield name, tuple(int(d) for d in shape), offset


def decode(data: bytes) -> Dict[str, np.ndarray]:
    if len(data) < 4:
        raise Truncated("file shorter than the magic number")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    if len(data) < 4 + _TRAILER:
        raise Truncated("file shorter than the minimal TVT1 file")
    end = len(data) - _TRAILER
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        try:
            for _ in _walk(data, end):
                pass
        except Truncated:
            raise
        except (UnicodeDecodeError, struct.error, UnsupportedDtype, OverflowError, ValueError):
            pass
        raise ChecksumMismatch("CRC32 does not match file contents")
    out: Dict[str, np.ndarray] = {}
    for name, shape, offset in _walk(data, end):
        if name in out:
            raise DuplicateName(f"duplicate tensor name {name!r}")
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=offset).astype(np.float64)
        out[name] = arr.reshape(shape)
    (count,) = struct.unpack("<Q", data[end: end + 8])
    if count != len(out):
        raise Truncated(f"header declares {count} tensors, found {len(out)}")
    return out


def write_tensor_file(path, tensors) -> None:
    Path(path).write_bytes(encode(tensors))


def read_tensor_file(path) -> Dict[str, np.ndarray]:
    return decode(Path(path).read_bytes())
