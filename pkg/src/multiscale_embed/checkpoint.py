"""Single-file binary checkpoints.

Layout: magic bytes ``AAANE\\0``, format version (u32), tensor count (u32),
then per tensor a u32 name length, the UTF-8 name, a u32 rank, u32 dims, and
the row-major float64 payload. All integers and floats little-endian.
Every value in a training state, config scalars included, is stored as a
named tensor, so the format needs no side metadata.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .exceptions import CheckpointError

MAGIC = b"AAANE\x00"
FORMAT_VERSION = 1


def write_checkpoint(path, tensors):
    """Atomically write name -> float64 array mappings to ``path``."""
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<I", FORMAT_VERSION)
    payload += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
        encoded = name.encode("utf-8")
        payload += struct.pack("<I", len(encoded))
        payload += encoded
        payload += struct.pack("<I", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.astype("<f8").tobytes()
    _atomic_write_bytes(path, bytes(payload))


def read_checkpoint(path):
    """Load a checkpoint into a name -> float64 array dict.

    Raises CheckpointError on bad magic, unsupported version, or truncation.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc

    view = memoryview(blob)
    offset = 0

    def take(count, what):
        nonlocal offset
        if offset + count > len(view):
            raise CheckpointError(f"truncated checkpoint: expected {what}")
        chunk = view[offset : offset + count]
        offset += count
        return chunk

    if bytes(take(len(MAGIC), "magic bytes")) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    (version,) = struct.unpack("<I", take(4, "format version"))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    (count,) = struct.unpack("<I", take(4, "tensor count"))

    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = bytes(take(name_len, "tensor name")).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, "tensor rank"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, "tensor dims"))
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(take(8 * size, f"payload of '{name}'"), dtype="<f8")
        tensors[name] = data.reshape(shape).astype(np.float64)
    if offset != len(view):
        raise CheckpointError(f"{len(view) - offset} trailing byte(s) after last tensor")
    return tensors


def _atomic_write_bytes(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text):
    _atomic_write_bytes(path, text.encode("utf-8"))
