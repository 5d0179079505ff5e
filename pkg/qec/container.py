"""
NQD1 binary container used for network checkpoints and code files.

Layout (little-endian):
    b"NQD1"
    u32  tensor count
    per tensor: u16 name length, UTF-8 name, u8 rank, u32 extent * rank,
                float32 data (C order)
    u32  metadata length, UTF-8 JSON metadata (sorted keys)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from qec.code import ToricCode, build_toric

MAGIC = b"NQD1"
FORMAT_VERSION = 1


class ContainerFormatError(ValueError):
    pass


def write_container(path: str | Path, tensors: dict[str, np.ndarray], metadata: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        data = np.asarray(array, dtype="<f4")
        if len(encoded) > 0xFFFF or data.ndim > 0xFF:
            raise ContainerFormatError(f"tensor {name!r} cannot be stored (name or rank too long)")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes(order="C"))
    meta = json.dumps({"format_version": FORMAT_VERSION, **metadata}, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(meta)))
    chunks.append(meta)
    path.write_bytes(b"".join(chunks))
    return path


def read_container(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ContainerFormatError(f"{path} is not an NQD1 container")
    offset = 4

    def take(fmt: str) -> tuple:
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(raw):
            raise ContainerFormatError(f"{path} is truncated")
        values = struct.unpack_from(fmt, raw, offset)
        offset += size
        return values

    (count,) = take("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<H")
        name = raw[offset: offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = take("<B")
        shape = take(f"<{rank}I") if rank else ()
        n_items = int(np.prod(shape, dtype=np.int64))
        end = offset + 4 * n_items
        if end > len(raw):
            raise ContainerFormatError(f"{path} is truncated inside tensor {name!r}")
        tensors[name] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape).copy()
        offset = end
    (meta_len,) = take("<I")
    metadata = json.loads(raw[offset: offset + meta_len].decode("utf-8"))
    if metadata.get("format_version") != FORMAT_VERSION:
        raise ContainerFormatError(f"unsupported container version {metadata.get('format_version')}")
    return tensors, metadata


# ── code files ────────────────────────────────────────────────────────────────

def write_code(path: str | Path, code: ToricCode) -> Path:
    return write_container(
        path,
        {"face_checks": code.dense_face_checks, "vertex_checks": code.dense_vertex_checks},
        {"kind": "code", "L": code.L, "dim": code.dim},
    )


def read_code(path: str | Path) -> ToricCode:
    """Load a code file and check it against a fresh construction."""
    tensors, meta = read_container(path)
    if meta.get("kind") != "code":
        raise ContainerFormatError(f"{path} holds a {meta.get('kind')!r}, not a code")
    code = build_toric(int(meta["L"]), int(meta["dim"]))
    for name, expected in (("face_checks", code.dense_face_checks), ("vertex_checks", code.dense_vertex_checks)):
        stored = tensors.get(name)
        if stored is None or not np.array_equal(stored.astype(np.uint8), expected):
            raise ContainerFormatError(f"{path}: stored {name} differ from the L={code.L} construction")
    return code
