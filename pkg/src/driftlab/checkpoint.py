"""Binary parameter checkpoints.

Layout, all little-endian:

    8 bytes   magic b"DRIFTLAB"
    u32       format version (1)
    u32       length of the architecture JSON in bytes
    bytes     architecture JSON (utf-8, sorted keys)
    u64       parameter count
    f64 * n   parameter values

A round-trip reproduces the parameter vector bit-for-bit.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .net import Arch, ParamVector

MAGIC = b"DRIFTLAB"
VERSION = 1


def save_checkpoint(path, params: ParamVector) -> Path:
    path = Path(path)
    arch_json = json.dumps(params.arch.to_dict(), sort_keys=True).encode("utf-8")
    values = np.ascontiguousarray(params.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(arch_json)))
        fh.write(arch_json)
        fh.write(struct.pack("<Q", values.shape[0]))
        fh.write(values.tobytes())
    return path


def load_checkpoint(path) -> ParamVector:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a driftlab checkpoint (bad magic)")
    offset = 8
    (version,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (json_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    arch = Arch.from_dict(json.loads(blob[offset : offset + json_len].decode("utf-8")))
    offset += json_len
    (count,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    expected = offset + 8 * count
    if len(blob) != expected:
        raise ValueError(f"{path}: truncated checkpoint ({len(blob)} bytes, expected {expected})")
    if count != arch.param_count():
        raise ValueError(
            f"{path}: parameter count {count} does not match architecture ({arch.param_count()})"
        )
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64)
    return ParamVector(arch, values)
