"""Single-file, versioned, checksummed state serialization.

Layout (all integers little-endian)::

    8 bytes   magic  b"PSACCKPT"
    4 bytes   format version (uint32)
    32 bytes  SHA-256 of everything after this field
    8 bytes   header length H (uint64)
    H bytes   UTF-8 JSON header (sorted keys)
    ...       raw array bytes, concatenated in header order

The header holds the state tree with every numpy array replaced by
``{"__array__": i}``; entry ``i`` of ``header["arrays"]`` gives its dtype,
shape, byte offset and length. Writing the same state twice produces the
same bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

MAGIC = b"PSACCKPT"
VERSION = 1


def _flatten(tree, arrays: list):
    if isinstance(tree, np.ndarray):
        arrays.append(np.ascontiguousarray(tree))
        return {"__array__": len(arrays) - 1}
    if isinstance(tree, dict):
        return {str(k): _flatten(v, arrays) for k, v in tree.items()}
    if isinstance(tree, (list, tuple)):
        return [_flatten(v, arrays) for v in tree]
    if isinstance(tree, np.generic):
        return tree.item()
    return tree


def _unflatten(tree, arrays: list):
    if isinstance(tree, dict):
        if set(tree) == {"__array__"}:
            return arrays[tree["__array__"]]
        return {k: _unflatten(v, arrays) for k, v in tree.items()}
    if isinstance(tree, list):
        return [_unflatten(v, arrays) for v in tree]
    return tree


def dumps(state: dict) -> bytes:
    arrays: list[np.ndarray] = []
    tree = _flatten(state, arrays)
    entries, offset = [], 0
    for a in arrays:
        entries.append({"dtype": a.dtype.str, "shape": list(a.shape), "offset": offset,
                        "nbytes": a.nbytes})
        offset += a.nbytes
    header = json.dumps({"tree": tree, "arrays": entries}, sort_keys=True,
                        separators=(",", ":")).encode()
    body = struct.pack("<Q", len(header)) + header + b"".join(a.tobytes() for a in arrays)
    return MAGIC + struct.pack("<I", VERSION) + hashlib.sha256(body).digest() + body


def loads(data: bytes) -> dict:
    if len(data) < 52 or data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    (version,) = struct.unpack("<I", data[8:12])
    if version != VERSION:
        raise CheckpointError(f"checkpoint format version {version}, expected {VERSION}")
    digest, body = data[12:44], data[44:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checksum mismatch: checkpoint is corrupt")
    (hlen,) = struct.unpack("<Q", body[:8])
    header = json.loads(body[8:8 + hlen])
    blob = body[8 + hlen:]
    arrays = []
    for e in header["arrays"]:
        buf = blob[e["offset"]:e["offset"] + e["nbytes"]]
        arrays.append(np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy())
    return _unflatten(header["tree"], arrays)


def save(path, state: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(state))
    tmp.replace(path)


def load(path) -> dict:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    return loads(data)
