"""The DSHC binary model format.

Layout (little-endian)::

    b"DSHC"  u32 version  u32 len  descriptor (utf-8)  u32 count
    count x ( u16 len  name (utf-8)  u8 ndim  u32 x ndim dims  f32 data )
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from ..errors import FormatError

MAGIC = b"DSHC"
VERSION = 1


def dumps_model(descriptor: str, params: dict) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    d = descriptor.encode("utf-8")
    parts += [struct.pack("<I", len(d)), d, struct.pack("<I", len(params))]
    for name, arr in params.items():
        nb = name.encode("utf-8")
        parts += [struct.pack("<H", len(nb)), nb, struct.pack("<B", arr.ndim)]
        parts += [struct.pack("<I", int(s)) for s in arr.shape]
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def loads_model(data: bytes) -> tuple[str, dict]:
    """Parse a DSHC blob into (descriptor, {name: float32 array})."""
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError("truncated DSHC model file")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4) != MAGIC:
        raise FormatError("not a DSHC model file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise FormatError(f"unsupported DSHC version {version} (expected {VERSION})")
    (dlen,) = struct.unpack("<I", take(4))
    descriptor = take(dlen).decode("utf-8")
    (count,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = tuple(struct.unpack("<I", take(4))[0] for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        params[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if pos != len(data):
        raise FormatError("trailing bytes after DSHC model data")
    return descriptor, params


def save_model(path, descriptor: str, params: dict) -> None:
    data = dumps_model(descriptor, params)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dshc-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> tuple[str, dict]:
    with open(path, "rb") as f:
        return loads_model(f.read())
