"""Binary checkpoint format.

Layout: magic, format version, a JSON metadata blob, then a flat ordered
list of (name, shape, row-major float64 payload) entries. Round-trips
are bit-exact; any structural damage (bad magic, truncated payload,
version mismatch) raises CheckpointError.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"LSCP"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, named_arrays, meta=None):
    """Write ordered (name, ndarray) pairs plus a metadata dict."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(meta_bytes)))
        f.write(meta_bytes)
        entries = list(named_arrays)
        f.write(struct.pack("<Q", len(entries)))
        for name, arr in entries:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.tobytes(order="C"))


def _read(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path):
    """Read a checkpoint; returns (ordered list of (name, array), meta)."""
    with open(path, "rb") as f:
        if _read(f, 4, "magic") != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", _read(f, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (mlen,) = struct.unpack("<Q", _read(f, 8, "metadata length"))
        meta = json.loads(_read(f, mlen, "metadata").decode("utf-8"))
        (count,) = struct.unpack("<Q", _read(f, 8, "entry count"))
        out = []
        for _ in range(count):
            (nlen,) = struct.unpack("<I", _read(f, 4, "name length"))
            name = _read(f, nlen, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(f, 4, "ndim"))
            shape = tuple(struct.unpack("<Q", _read(f, 8, "dim"))[0] for _ in range(ndim))
            n_items = 1
            for d in shape:
                n_items *= d
            payload = _read(f, n_items * 8, f"payload of {name!r}")
            out.append((name, np.frombuffer(payload, dtype="<f8").reshape(shape).copy()))
        trailing = f.read(1)
        if trailing:
            raise CheckpointError("trailing bytes after final checkpoint entry")
    return out, meta
