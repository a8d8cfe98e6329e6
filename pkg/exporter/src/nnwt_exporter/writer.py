"""NNWT archive writer/reader.

Format (little-endian): magic "NNWT", u32 version=1, u32 tensor count, then
per tensor u16 name length, UTF-8 name, u8 rank, u32 extents[rank], f32
payload; footer u32 metadata length + UTF-8 JSON; trailing CRC-32 over
everything prior. Tensors are written in sorted name order and the metadata
serialization is fixed, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

MAGIC = b"NNWT"
VERSION = 1


class ArchiveError(Exception):
    pass


def metadata_block(backbone: str, mean, std, input_resolution: int) -> bytes:
    meta = {
        "backbone": backbone,
        "mean": [float(v) for v in mean],
        "std": [float(v) for v in std],
        "input_resolution": int(input_resolution),
    }
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_archive(path, tensors: dict[str, np.ndarray], backbone: str, mean, std,
                  input_resolution: int) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    meta = metadata_block(backbone, mean, std, input_resolution)
    parts.append(struct.pack("<I", len(meta)))
    parts.append(meta)
    blob = b"".join(parts)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(blob)


def read_archive(path) -> tuple[dict[str, np.ndarray], dict]:
    """Parse and CRC-check an archive. Raises ArchiveError on any damage."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise ArchiveError(f"{path}: not an NNWT archive")
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != struct.unpack("<I", blob[-4:])[0]:
        raise ArchiveError(f"{path}: checksum mismatch")
    pos = 4
    version, count = struct.unpack_from("<II", blob, pos)
    pos += 8
    if version != VERSION:
        raise ArchiveError(f"{path}: unsupported version {version}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        extents = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        n = int(np.prod(extents)) if extents else 1
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(extents).copy()
        pos += 4 * n
    (meta_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    meta = json.loads(blob[pos : pos + meta_len].decode("utf-8"))
    return tensors, meta
