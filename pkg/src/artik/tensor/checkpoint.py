"""Binary checkpoint: named float64 blobs plus JSON metadata.

Layout (all integers little-endian)::

    8 bytes   magic b"ARTIKCK\\0"
    u32       format version (1)
    u32       metadata length M
    M bytes   UTF-8 JSON, keys sorted
    u32       tensor count T
    T times:  u16 name length, name (UTF-8), u8 ndim, ndim x u32 shape,
              prod(shape) x f64 data (C order)
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import CheckpointMismatchError

MAGIC = b"ARTIKCK\0"
VERSION = 1


def checkpoint_bytes(params, meta):
    out = [MAGIC, struct.pack("<I", VERSION)]
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    out += [struct.pack("<I", len(blob)), blob, struct.pack("<I", len(params))]
    for name, arr in params.items():
        a = np.asarray(arr, dtype="<f8")
        key = name.encode("utf-8")
        out += [struct.pack("<H", len(key)), key, struct.pack("<B", a.ndim)]
        out += [struct.pack(f"<{a.ndim}I", *a.shape), a.tobytes(order="C")]
    return b"".join(out)


def parse_checkpoint(data):
    if data[:8] != MAGIC:
        raise CheckpointMismatchError("not an artik checkpoint (bad magic)")
    pos = 8
    try:
        (version,) = struct.unpack_from("<I", data, pos)
        if version != VERSION:
            raise CheckpointMismatchError(f"unsupported checkpoint version {version}")
        (mlen,) = struct.unpack_from("<I", data, pos + 4)
        pos += 8
        meta = json.loads(data[pos:pos + mlen].decode("utf-8"))
        pos += mlen
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            name = data[pos + 2:pos + 2 + nlen].decode("utf-8")
            pos += 2 + nlen
            (ndim,) = struct.unpack_from("<B", data, pos)
            shape = struct.unpack_from(f"<{ndim}I", data, pos + 1)
            pos += 1 + 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape)
            params[name] = arr.astype(np.float64)
            pos += 8 * size
    except (struct.error, ValueError) as exc:
        raise CheckpointMismatchError(f"truncated or corrupt checkpoint: {exc}") from exc
    if pos != len(data):
        raise CheckpointMismatchError(f"{len(data) - pos} trailing bytes after checkpoint tensors")
    return params, meta


def save_checkpoint(path, params, meta):
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(checkpoint_bytes(params, meta))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointMismatchError(f"cannot read checkpoint {path}: {exc}") from exc
    return parse_checkpoint(data)
