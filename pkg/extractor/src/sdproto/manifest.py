"""Manifest CSV: per-image labels for an extraction run.

Columns are exactly `path,authenticity,generator,class_hint`. Paths are
resolved relative to the manifest's own directory, authenticity is `real`
or `fake`, generator names one of the eight known sources (empty for real
rows), and class_hint is an optional integer 0-999.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .extract import ImageEntry
from .fpro import FAKE, GENERATOR_NAMES, REAL

COLUMNS = ("path", "authenticity", "generator", "class_hint")


def read_manifest(path: Path | str) -> tuple[ImageEntry, ...]:
    path = Path(path)
    base = path.parent
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty manifest")
    if tuple(h.strip() for h in rows[0]) != COLUMNS:
        raise ValueError(
            f"{path}: header must be {','.join(COLUMNS)}, got {','.join(rows[0])}")

    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(COLUMNS):
            raise ValueError(f"{path}:{lineno}: expected {len(COLUMNS)} columns")
        raw_path, auth, gen, hint = (cell.strip() for cell in row)

        auth_low = auth.lower()
        if auth_low not in ("real", "fake"):
            raise ValueError(f"{path}:{lineno}: authenticity must be real or fake")
        authenticity = REAL if auth_low == "real" else FAKE

        generator: str | None
        if authenticity == REAL:
            if gen:
                raise ValueError(f"{path}:{lineno}: real rows leave generator empty")
            generator = None
        else:
            if gen not in GENERATOR_NAMES:
                raise ValueError(f"{path}:{lineno}: unknown generator {gen!r}")
            generator = gen

        class_hint: int | None = None
        if hint:
            try:
                class_hint = int(hint)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: class_hint must be an integer") from None
            if not 0 <= class_hint <= 999:
                raise ValueError(f"{path}:{lineno}: class_hint out of range")

        image_path = (base / raw_path) if not Path(raw_path).is_absolute() else Path(raw_path)
        entries.append(ImageEntry(image_path, raw_path, authenticity, generator, class_hint))

    if not entries:
        raise ValueError(f"{path}: manifest lists no images")
    return tuple(entries)
