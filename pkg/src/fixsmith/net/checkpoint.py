"""Self-describing checkpoint container (layout in docs/checkpoint.md)."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelParameters

MAGIC = b"FXSMCKPT"
VERSION = 1


def save_checkpoint(path: str | Path, params: ModelParameters) -> None:
    """Write config block, array index, then raw little-endian doubles."""
    arrays = params.arrays()
    header = {
        "version": VERSION,
        "config": asdict(params.cfg),
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> ModelParameters:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a fixsmith checkpoint")
        version, header_len = struct.unpack("<IQ", fh.read(12))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        cfg = ModelConfig(**header["config"])
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated array {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return ModelParameters(cfg, arrays)
