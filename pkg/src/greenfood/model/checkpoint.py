"""Versioned binary checkpoints.

Layout (little endian)::

    magic    8 bytes  b"GFOODCK\\0"
    version  u32
    cfg_len  u32, then cfg_len bytes of UTF-8 JSON (model config + extras)
    count    u32
    per parameter:
        name_len u16, name (UTF-8)
        trainable u8
        ndim u8, ndim x u64 dims
        row-major float64 payload
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..numcore import Tensor
from .config import ModelConfig

MAGIC = b"GFOODCK\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, config: ModelConfig, params: dict, extra: dict | None = None) -> None:
    header = json.dumps({"model": config.to_dict(), "extra": extra or {}}, sort_keys=True).encode()
    chunks = [MAGIC, struct.pack("<II", VERSION, len(header)), header, struct.pack("<I", len(params))]
    for name, p in params.items():
        raw = name.encode()
        chunks.append(struct.pack("<HBB", len(raw), int(p.requires_grad), p.value.ndim))
        chunks.append(raw)
        chunks.append(struct.pack(f"<{p.value.ndim}Q", *p.value.shape))
        chunks.append(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> tuple:
    """Return ``(config, params, extra)``."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, cfg_len = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    header = json.loads(data[pos:pos + cfg_len])
    pos += cfg_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    params = {}
    for _ in range(count):
        name_len, trainable, ndim = struct.unpack_from("<HBB", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode()
        pos += name_len
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        value = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
        params[name] = Tensor(value, requires_grad=bool(trainable), name=name)
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return ModelConfig.from_dict(header["model"]), params, header["extra"]
