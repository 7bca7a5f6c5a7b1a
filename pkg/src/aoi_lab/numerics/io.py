"""Binary checkpoint container.

Layout (little-endian)::

    b"TWA1"
    repeated:  u64 name_len | name (UTF-8) | u64 rank | u64 dims[rank] | f64 values[prod(dims)]
    u32 CRC32 of every preceding byte

A JSON document (the model config) travels as a rank-1 entry whose values are
its UTF-8 bytes.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..exceptions import SchemaError

MAGIC = b"TWA1"
CONFIG_KEY = "config"


def encode_checkpoint(params, config=None):
    chunks = [MAGIC]
    entries = []
    if config is not None:
        raw = json.dumps(config, sort_keys=True).encode("utf-8")
        entries.append((CONFIG_KEY, np.frombuffer(raw, dtype=np.uint8).astype(np.float64)))
    for name in sorted(params):
        value = params[name]
        entries.append((name, np.asarray(getattr(value, "data", value), dtype=np.float64)))
    for name, arr in entries:
        if not np.all(np.isfinite(arr)):
            raise SchemaError("non-finite values", field=name)
        key = name.encode("utf-8")
        chunks.append(struct.pack("<Q", len(key)))
        chunks.append(key)
        chunks.append(struct.pack("<Q", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_checkpoint(blob):
    if len(blob) < len(MAGIC) + 4 or blob[:4] != MAGIC:
        raise SchemaError("bad magic bytes", field="checkpoint")
    body, crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise SchemaError("CRC mismatch", field="checkpoint")
    pos = len(MAGIC)
    params, config = {}, None
    try:
        while pos < len(body):
            (n,) = struct.unpack_from("<Q", body, pos)
            pos += 8
            name = body[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<Q", body, pos)
            pos += 8
            dims = struct.unpack_from(f"<{rank}Q", body, pos)
            pos += 8 * rank
            count = int(np.prod(dims, dtype=np.int64))
            arr = np.frombuffer(body, dtype="<f8", count=count, offset=pos).reshape(dims).astype(np.float64)
            pos += 8 * count
            if name == CONFIG_KEY:
                config = json.loads(arr.astype(np.uint8).tobytes().decode("utf-8"))
            else:
                params[name] = arr
    except (struct.error, ValueError) as exc:
        raise SchemaError(f"truncated or corrupt entry ({exc})", field="checkpoint") from None
    for name, arr in params.items():
        if not np.all(np.isfinite(arr)):
            raise SchemaError("non-finite values", field=name)
    return params, config


def save_checkpoint(path, params, config=None):
    Path(path).write_bytes(encode_checkpoint(params, config))


def load_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())
