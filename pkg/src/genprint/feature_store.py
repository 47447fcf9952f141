"""Prototype feature sets: the FPRO on-disk format, splits, and support sampling.

A prototype is one image reduced to a D-dimensional vector (one value per
channel of some U-Net layer). This module owns the record/set types, the
binary file format they travel in, deterministic train/validation splitting,
and the balanced subsets the k-NN classifier votes over.

FPRO format (little-endian throughout):

    magic "FPRO" (4 bytes)
    version          u16  (currently 1)
    dim              u32  (feature vector length D, > 0)
    record_count     u64
    layer_tag        u16 length + UTF-8 bytes
    generator table  u16 count, then per name: u16 length + UTF-8 bytes
    records, record_count times:
        image_id         u16 length + UTF-8 bytes
        authenticity     u8   (0 = real, 1 = fake)
        generator_index  u16  (index into the table, 0xFFFF = none/real)
        class_hint       i32  (-1 = absent)
        features         dim x f32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

FPRO_MAGIC = b"FPRO"
FPRO_VERSION = 1
_NO_GENERATOR = 0xFFFF
_NO_CLASS_HINT = -1


class FeatureStoreError(ValueError):
    """Invalid feature data or a malformed/corrupt FPRO file."""


class Authenticity(Enum):
    REAL = 0
    FAKE = 1


class Generator(Enum):
    MIDJOURNEY = "Midjourney"
    SDV14 = "SDV14"
    SDV15 = "SDV15"
    ADM = "ADM"
    GLIDE = "Glide"
    WUKONG = "Wukong"
    VQDM = "VQDM"
    BIGGAN = "BigGAN"


# Column/row order used by every cross-generator table.
GENERATOR_ORDER = (
    Generator.MIDJOURNEY,
    Generator.SDV14,
    Generator.SDV15,
    Generator.ADM,
    Generator.GLIDE,
    Generator.WUKONG,
    Generator.VQDM,
    Generator.BIGGAN,
)

# Class order for 9-way source attribution; real images are class 0 so the
# deterministic tie-break (lowest index) prefers the conservative call.
ATTRIBUTION_CLASSES = ("Real",) + tuple(g.value for g in GENERATOR_ORDER)


@dataclass
class PrototypeRecord:
    """One image's prototype vector plus its labels."""

    features: np.ndarray  # (D,) float32
    authenticity: Authenticity
    generator: Generator | None
    image_id: str
    class_hint: int | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 1:
            raise FeatureStoreError("features must be a 1-D vector")
        if not np.all(np.isfinite(self.features)):
            raise FeatureStoreError(f"non-finite feature in record {self.image_id!r}")
        real = self.authenticity is Authenticity.REAL
        if real != (self.generator is None):
            raise FeatureStoreError(
                f"record {self.image_id!r}: authenticity/generator mismatch "
                "(real records carry no generator, fake records must name one)"
            )
        if self.class_hint is not None and not 0 <= self.class_hint <= 999:
            raise FeatureStoreError(f"class_hint out of range: {self.class_hint}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PrototypeRecord):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.authenticity is other.authenticity
            and self.generator is other.generator
            and self.class_hint == other.class_hint
            and np.array_equal(self.features, other.features)
        )


@dataclass
class FeatureSet:
    """An ordered collection of prototypes sharing one dimension and layer.

    Treated as immutable once built; safe to share across threads.
    """

    dim: int
    layer_tag: str
    records: list[PrototypeRecord]
    _matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise FeatureStoreError("dim must be positive")
        seen: set[str] = set()
        for rec in self.records:
            if rec.features.shape[0] != self.dim:
                raise FeatureStoreError(
                    f"record {rec.image_id!r} has {rec.features.shape[0]} features, expected {self.dim}"
                )
            if rec.image_id in seen:
                raise FeatureStoreError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.layer_tag == other.layer_tag
            and self.records == other.records
        )

    def matrix(self) -> np.ndarray:
        """All feature vectors stacked to an (N, D) float32 array (cached)."""
        if self._matrix is None:
            if self.records:
                self._matrix = np.stack([r.features for r in self.records])
            else:
                self._matrix = np.empty((0, self.dim), dtype=np.float32)
        return self._matrix

    def authenticity_labels(self) -> np.ndarray:
        """0 for real, 1 for fake, per record."""
        return np.array([r.authenticity.value for r in self.records], dtype=np.int64)

    def attribution_labels(self) -> np.ndarray:
        """Index into ATTRIBUTION_CLASSES per record."""
        out = np.empty(len(self.records), dtype=np.int64)
        for i, rec in enumerate(self.records):
            name = "Real" if rec.generator is None else rec.generator.value
            out[i] = ATTRIBUTION_CLASSES.index(name)
        return out

    def subset(self, indices: np.ndarray | list[int]) -> "FeatureSet":
        return FeatureSet(self.dim, self.layer_tag, [self.records[int(i)] for i in indices])

    def generators_present(self) -> list[Generator]:
        seen: list[Generator] = []
        for rec in self.records:
            if rec.generator is not None and rec.generator not in seen:
                seen.append(rec.generator)
        return seen


@dataclass
class SplitPair:
    train: FeatureSet
    validation: FeatureSet
    seed: int


# ---------------------------------------------------------------------------
# FPRO serialization
# ---------------------------------------------------------------------------


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FeatureStoreError(f"string too long for format: {text[:32]!r}...")
    return struct.pack("<H", len(raw)) + raw


def write_feature_file(fset: FeatureSet, path: str | Path) -> int:
    """Serialize a FeatureSet; returns bytes written.

    Refuses to write sets violating their invariants (re-validated here so a
    mutated-in-place set cannot reach disk).
    """
    FeatureSet(fset.dim, fset.layer_tag, fset.records)  # re-run invariant checks
    for rec in fset.records:
        if not np.all(np.isfinite(rec.features)):
            raise FeatureStoreError(f"non-finite feature in record {rec.image_id!r}")

    # Generator table in order of first appearance, so rewriting a set read
    # from disk reproduces the file byte for byte.
    table: list[str] = []
    index: dict[str, int] = {}
    for rec in fset.records:
        if rec.generator is not None and rec.generator.value not in index:
            index[rec.generator.value] = len(table)
            table.append(rec.generator.value)
    if len(table) > 0xFFFE:
        raise FeatureStoreError("too many generator names")

    parts = [
        FPRO_MAGIC,
        struct.pack("<HIQ", FPRO_VERSION, fset.dim, len(fset.records)),
        _pack_str(fset.layer_tag),
        struct.pack("<H", len(table)),
    ]
    parts.extend(_pack_str(name) for name in table)
    for rec in fset.records:
        gen_idx = _NO_GENERATOR if rec.generator is None else index[rec.generator.value]
        hint = _NO_CLASS_HINT if rec.class_hint is None else rec.class_hint
        parts.append(_pack_str(rec.image_id))
        parts.append(struct.pack("<BHi", rec.authenticity.value, gen_idx, hint))
        parts.append(rec.features.astype("<f4", copy=False).tobytes())

    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return len(blob)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FeatureStoreError("truncated payload")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def take_str(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def read_feature_file(path: str | Path) -> FeatureSet:
    """Load an FPRO file, validating the header and every record."""
    rd = _Reader(Path(path).read_bytes())
    if rd.take(4) != FPRO_MAGIC:
        raise FeatureStoreError(f"bad magic: {path} is not an FPRO file")
    version, dim, count = rd.unpack("<HIQ")
    if version != FPRO_VERSION:
        raise FeatureStoreError(f"unsupported version {version} (expected {FPRO_VERSION})")
    if dim == 0:
        raise FeatureStoreError("dim=0 in header")
    layer_tag = rd.take_str()
    (table_len,) = rd.unpack("<H")
    table = [rd.take_str() for _ in range(table_len)]
    try:
        generators = [Generator(name) for name in table]
    except ValueError as exc:
        raise FeatureStoreError(f"unknown generator name in table: {exc}") from exc

    records: list[PrototypeRecord] = []
    for _ in range(count):
        image_id = rd.take_str()
        auth_byte, gen_idx, hint = rd.unpack("<BHi")
        if auth_byte not in (0, 1):
            raise FeatureStoreError(f"invalid authenticity byte {auth_byte}")
        if gen_idx != _NO_GENERATOR and gen_idx >= len(table):
            raise FeatureStoreError(f"generator index {gen_idx} outside table")
        feats = np.frombuffer(rd.take(4 * dim), dtype="<f4").copy()
        records.append(
            PrototypeRecord(
                features=feats,
                authenticity=Authenticity(auth_byte),
                generator=None if gen_idx == _NO_GENERATOR else generators[gen_idx],
                image_id=image_id,
                class_hint=None if hint == _NO_CLASS_HINT else hint,
            )
        )
    if rd.pos != len(rd.blob):
        raise FeatureStoreError(f"{len(rd.blob) - rd.pos} trailing bytes after last record")
    return FeatureSet(dim=dim, layer_tag=layer_tag, records=records)


# ---------------------------------------------------------------------------
# Splitting and support sampling
# ---------------------------------------------------------------------------


def _stratum_key(rec: PrototypeRecord) -> tuple[int, str]:
    return (rec.authenticity.value, "" if rec.generator is None else rec.generator.value)


def split_train_val(fset: FeatureSet, train_fraction: float, seed: int) -> SplitPair:
    """Deterministic stratified split by (authenticity, generator).

    Each stratum contributes round(n * train_fraction) records to the train
    side, so every stratum lands within one record of the requested fraction.
    """
    if not 0.0 < train_fraction < 1.0:
        raise FeatureStoreError(f"train_fraction must be in (0, 1), got {train_fraction}")

    strata: dict[tuple[int, str], list[int]] = {}
    for i, rec in enumerate(fset.records):
        strata.setdefault(_stratum_key(rec), []).append(i)

    train_idx: list[int] = []
    val_idx: list[int] = []
    for key in sorted(strata):
        members = strata[key]
        if len(members) < 2:
            raise FeatureStoreError(
                f"stratum {key} has {len(members)} record(s); need at least 2 to split"
            )
        rng = np.random.default_rng([seed, key[0], *key[1].encode("utf-8")])
        perm = rng.permutation(len(members))
        n_train = int(round(len(members) * train_fraction))
        n_train = min(max(n_train, 1), len(members) - 1)  # both sides non-empty
        for j in perm[:n_train]:
            train_idx.append(members[j])
        for j in perm[n_train:]:
            val_idx.append(members[j])

    train_idx.sort()
    val_idx.sort()
    return SplitPair(
        train=fset.subset(train_idx),
        validation=fset.subset(val_idx),
        seed=seed,
    )


def _seed_parts(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def sample_support(train: FeatureSet, size: int, seed):
    """Balanced real/fake support subset: size/2 of each, without replacement.

    `seed` may be an int or a tuple of ints; the draw depends only on
    (seed, size), so grid cells sample independently of evaluation order.
    """
    from .knn import SupportSet

    if size <= 0 or size % 2 != 0:
        raise FeatureStoreError(f"support size must be a positive even integer, got {size}")
    half = size // 2
    real_idx = [i for i, r in enumerate(train.records) if r.authenticity is Authenticity.REAL]
    fake_idx = [i for i, r in enumerate(train.records) if r.authenticity is Authenticity.FAKE]
    if len(real_idx) < half or len(fake_idx) < half:
        raise FeatureStoreError(
            f"need {half} real and {half} fake records, have {len(real_idx)}/{len(fake_idx)}"
        )
    rng = np.random.default_rng([*_seed_parts(seed), size])
    chosen_real = rng.choice(len(real_idx), size=half, replace=False)
    chosen_fake = rng.choice(len(fake_idx), size=half, replace=False)
    rows = sorted([real_idx[i] for i in chosen_real] + [fake_idx[i] for i in chosen_fake])

    mat = train.matrix()[rows]
    labels = train.authenticity_labels()[rows]
    return SupportSet(features=mat, labels=labels, class_count=2, class_names=("Real", "Fake"))


def sample_attribution_support(trains: list[FeatureSet], size: int, seed):
    """Support with size/9 records from each of the nine attribution classes.

    `trains` must hold one homogeneous FeatureSet per class, ordered as
    ATTRIBUTION_CLASSES. `seed` may be an int or tuple of ints.
    """
    from .knn import SupportSet

    n_classes = len(ATTRIBUTION_CLASSES)
    if len(trains) != n_classes:
        raise FeatureStoreError(f"expected {n_classes} class sets, got {len(trains)}")
    if size <= 0 or size % n_classes != 0:
        raise FeatureStoreError(f"support size {size} not divisible by {n_classes}")
    per_class = size // n_classes

    feats: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for cls_idx, (name, fset) in enumerate(zip(ATTRIBUTION_CLASSES, trains)):
        cls_labels = fset.attribution_labels()
        if not np.all(cls_labels == cls_idx):
            raise FeatureStoreError(f"class set {cls_idx} contains records not labeled {name!r}")
        if len(fset) < per_class:
            raise FeatureStoreError(
                f"class {name!r} has {len(fset)} records, need {per_class}"
            )
        rng = np.random.default_rng([*_seed_parts(seed), size, cls_idx])
        rows = np.sort(rng.choice(len(fset), size=per_class, replace=False))
        feats.append(fset.matrix()[rows])
        labels.append(np.full(per_class, cls_idx, dtype=np.int64))

    return SupportSet(
        features=np.concatenate(feats),
        labels=np.concatenate(labels),
        class_count=n_classes,
        class_names=ATTRIBUTION_CLASSES,
    )


# Support-size grids used by the hyperparameter searches.
DETECTION_SUPPORT_SIZES = (4, 10, 20, 30, 40, 60, 80, 100, 200, 250, 300, 350, 400, 600, 800, 1000, 2000)
ATTRIBUTION_SUPPORT_SIZES = (18, 45, 90, 135, 180, 270, 360, 450, 900, 1125, 1350, 1575, 1800, 2700, 3600, 4500, 9000)
DETECTION_K_GRID = tuple(range(1, 46, 2)) + (101,)
