"""Checksummed binary container for backbone weights.

Layout (little-endian throughout):
    magic "NNWT" | u32 version=1 | u32 tensor count
    per tensor:  u16 name length | name (UTF-8) | u8 rank | u32 extents[rank]
                 | f32 payload (row-major)
    footer:      u32 metadata length | metadata (UTF-8 JSON)
    trailer:     u32 CRC-32 over everything prior
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ArchiveFormatError

MAGIC = b"NNWT"
VERSION = 1

_REQUIRED_META = ("backbone", "mean", "std", "input_resolution")


@dataclass
class WeightArchive:
    backbone: str
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    input_resolution: int
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def require(self, name: str) -> np.ndarray:
        if name not in self.tensors:
            raise ArchiveFormatError(f"archive has no tensor named '{name}'")
        return self.tensors[name]


def _metadata_bytes(archive: WeightArchive) -> bytes:
    meta = {
        "backbone": archive.backbone,
        "mean": [float(v) for v in archive.mean],
        "std": [float(v) for v in archive.std],
        "input_resolution": int(archive.input_resolution),
    }
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_archive(archive: WeightArchive, path) -> None:
    """Serialize deterministically: tensors in sorted name order."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(archive.tensors))]
    for name in sorted(archive.tensors):
        arr = np.ascontiguousarray(archive.tensors[name], dtype=np.float32)
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    meta = _metadata_bytes(archive)
    parts.append(struct.pack("<I", len(meta)))
    parts.append(meta)
    blob = b"".join(parts)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(blob)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ArchiveFormatError("archive truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_archive(path) -> WeightArchive:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise ArchiveFormatError("archive truncated")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    body = blob[:-4]
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise ArchiveFormatError("archive checksum mismatch")

    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise ArchiveFormatError("bad magic bytes")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported archive version {version}")

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        if name in tensors:
            raise ArchiveFormatError(f"duplicate tensor name '{name}'")
        (rank,) = r.unpack("<B")
        extents = r.unpack(f"<{rank}I") if rank else ()
        n_values = int(np.prod(extents)) if extents else 1
        payload = r.take(4 * n_values)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(extents).copy()

    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArchiveFormatError(f"bad metadata block: {e}") from e
    if r.pos != len(body):
        raise ArchiveFormatError("trailing bytes after metadata")
    for key in _REQUIRED_META:
        if key not in meta:
            raise ArchiveFormatError(f"metadata missing '{key}'")
    mean = tuple(float(v) for v in meta["mean"])
    std = tuple(float(v) for v in meta["std"])
    if len(mean) != 3 or len(std) != 3:
        raise ArchiveFormatError("metadata mean/std must have 3 channels")

    return WeightArchive(
        backbone=str(meta["backbone"]),
        mean=mean,
        std=std,
        input_resolution=int(meta["input_resolution"]),
        tensors=tensors,
    )
