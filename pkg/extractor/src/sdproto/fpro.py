"""FPRO feature-file output.

This is the hand-off boundary to the classification toolkit: a little-endian
binary with one header and a flat run of records. The layout is written
here byte for byte rather than imported, so the extractor stays installable
on its own and the format itself is the only coupling.

    magic "FPRO" | version u16 = 1 | dim u32 | record_count u64
    | layer_tag: u16 length + UTF-8
    | generator table: u16 count, each u16 length + UTF-8
    | per record: image_id (u16 length + UTF-8) | authenticity u8
      | generator_index u16 (0xFFFF = none) | class_hint i32 (-1 = absent)
      | dim x f32 features
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FPRO"
VERSION = 1
NO_GENERATOR = 0xFFFF

# generator vocabulary shared with the classifier's file reader
GENERATOR_NAMES = (
    "Midjourney", "SDV14", "SDV15", "ADM", "Glide", "Wukong", "VQDM", "BigGAN",
)

REAL = 0
FAKE = 1


@dataclass(frozen=True)
class ProtoRecord:
    image_id: str
    authenticity: int
    generator: str | None
    class_hint: int | None
    features: np.ndarray


def _check(records: list[ProtoRecord], dim: int) -> None:
    seen = set()
    for rec in records:
        if rec.image_id in seen:
            raise ValueError(f"duplicate image id: {rec.image_id}")
        seen.add(rec.image_id)
        if rec.features.shape != (dim,):
            raise ValueError(
                f"{rec.image_id}: feature length {rec.features.shape} != dim {dim}")
        if not np.all(np.isfinite(rec.features)):
            raise ValueError(f"{rec.image_id}: non-finite features")
        if rec.authenticity not in (REAL, FAKE):
            raise ValueError(f"{rec.image_id}: bad authenticity {rec.authenticity}")
        if (rec.generator is None) != (rec.authenticity == REAL):
            raise ValueError(f"{rec.image_id}: real records carry no generator and "
                             "fake records carry exactly one")
        if rec.generator is not None and rec.generator not in GENERATOR_NAMES:
            raise ValueError(f"{rec.image_id}: unknown generator {rec.generator!r}")
        if rec.class_hint is not None and not 0 <= rec.class_hint <= 999:
            raise ValueError(f"{rec.image_id}: class hint out of range")


def _pack_str(text: str) -> bytes:
    data = text.encode("utf-8")
    if len(data) > 0xFFFF:
        raise ValueError("string too long for u16 length prefix")
    return struct.pack("<H", len(data)) + data


def write_fpro(path: Path | str, dim: int, layer_tag: str,
               records: list[ProtoRecord]) -> int:
    _check(records, dim)
    table = [n for n in GENERATOR_NAMES
             if any(r.generator == n for r in records)]
    index = {name: i for i, name in enumerate(table)}

    parts = [MAGIC, struct.pack("<HIQ", VERSION, dim, len(records))]
    parts.append(_pack_str(layer_tag))
    parts.append(struct.pack("<H", len(table)))
    parts.extend(_pack_str(name) for name in table)
    for rec in records:
        parts.append(_pack_str(rec.image_id))
        gen = NO_GENERATOR if rec.generator is None else index[rec.generator]
        hint = -1 if rec.class_hint is None else rec.class_hint
        parts.append(struct.pack("<BHi", rec.authenticity, gen, hint))
        parts.append(np.ascontiguousarray(
            rec.features, dtype="<f4").tobytes())

    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return len(blob)


def read_fpro(path: Path | str) -> tuple[int, str, list[ProtoRecord]]:
    """Reader for round-trip checks; the classifier has its own."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    off = 4
    version, dim, count = struct.unpack_from("<HIQ", data, off)
    off += struct.calcsize("<HIQ")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")

    def take_str(off: int) -> tuple[str, int]:
        (n,) = struct.unpack_from("<H", data, off)
        off += 2
        return data[off:off + n].decode("utf-8"), off + n

    layer_tag, off = take_str(off)
    (table_len,) = struct.unpack_from("<H", data, off)
    off += 2
    table = []
    for _ in range(table_len):
        name, off = take_str(off)
        table.append(name)

    records = []
    for _ in range(count):
        image_id, off = take_str(off)
        authenticity, gen, hint = struct.unpack_from("<BHi", data, off)
        off += struct.calcsize("<BHi")
        feats = np.frombuffer(data, dtype="<f4", count=dim, offset=off).copy()
        off += 4 * dim
        records.append(ProtoRecord(
            image_id, authenticity,
            None if gen == NO_GENERATOR else table[gen],
            None if hint == -1 else hint, feats))
    if off != len(data):
        raise ValueError("trailing bytes after last record")
    return dim, layer_tag, records
