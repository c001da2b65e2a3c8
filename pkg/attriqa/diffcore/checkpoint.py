"""Versioned binary tensor container.

Layout (all integers little-endian):

    magic      8 bytes  b"ATQTNSR\\0"
    version    u16
    meta_len   u32, then meta_len bytes of UTF-8 JSON (ArtifactHeader)
    count      u32
    name table count x (u16 length + UTF-8 name)
    tensors    count x (u8 ndim, ndim x u64 extent, u8 dtype code,
                        u64 nbytes, payload, u32 crc32 of payload)
"""

import io
import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Mapping

import numpy as np

from attriqa.errors import DataError
from attriqa.util.artifacts import ArtifactHeader
from attriqa.util.digests import sha256_file

logger = logging.getLogger(__name__)

MAGIC = b"ATQTNSR\x00"
CONTAINER_VERSION = 1

_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<f4"), 3: np.dtype("<i8")}
_CODES = {(v.kind, v.itemsize): k for k, v in _DTYPES.items()}


def _code(arr: np.ndarray) -> int:
    key = (arr.dtype.kind, arr.dtype.itemsize)
    if key not in _CODES:
        raise DataError(f"unsupported tensor dtype {arr.dtype}")
    return _CODES[key]


def write_tensors(path: Path | str, header: ArtifactHeader, tensors: Mapping[str, np.ndarray]) -> str:
    """Write the container and return its sha256 digest."""
    path = Path(path)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", CONTAINER_VERSION))
    meta = header.model_dump_json().encode("utf-8")
    buf.write(struct.pack("<I", len(meta)))
    buf.write(meta)
    names = list(tensors)
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
    for name in names:
        arr = np.ascontiguousarray(tensors[name])
        code = _code(arr)
        payload = arr.astype(_DTYPES[code], copy=False).tobytes()
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(struct.pack("<BQ", code, len(payload)))
        buf.write(payload)
        buf.write(struct.pack("<I", zlib.crc32(payload)))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(buf.getvalue())
    logger.debug(f"Wrote {len(names)} tensors to {path}")
    return sha256_file(path)


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DataError(f"{self.path}: truncated tensor container")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_tensors(path: Path | str) -> tuple[ArtifactHeader, dict[str, np.ndarray]]:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    if r.take(len(MAGIC)) != MAGIC:
        raise DataError(f"{path}: not a tensor container (bad magic)")
    (version,) = r.unpack("<H")
    if version != CONTAINER_VERSION:
        raise DataError(f"{path}: container version {version}, expected {CONTAINER_VERSION}")
    (meta_len,) = r.unpack("<I")
    try:
        header = ArtifactHeader.model_validate(json.loads(r.take(meta_len).decode("utf-8")))
    except ValueError as e:
        raise DataError(f"{path}: unreadable header: {e}") from e
    (count,) = r.unpack("<I")
    names = []
    for _ in range(count):
        (n,) = r.unpack("<H")
        names.append(r.take(n).decode("utf-8"))
    tensors = {}
    for name in names:
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        code, nbytes = r.unpack("<BQ")
        if code not in _DTYPES:
            raise DataError(f"{path}: tensor {name} has unknown dtype code {code}")
        payload = r.take(nbytes)
        (crc,) = r.unpack("<I")
        if zlib.crc32(payload) != crc:
            raise DataError(f"{path}: checksum mismatch in tensor {name}")
        arr = np.frombuffer(payload, dtype=_DTYPES[code]).reshape(shape).copy()
        tensors[name] = arr
    return header, tensors
