"""FPRO round trips and corruption handling, splits, and support sampling."""

import struct

import numpy as np
import pytest

from builders import make_record, random_feature_set
from genprint.feature_store import (
    ATTRIBUTION_CLASSES,
    DETECTION_K_GRID,
    DETECTION_SUPPORT_SIZES,
    ATTRIBUTION_SUPPORT_SIZES,
    GENERATOR_ORDER,
    Authenticity,
    FeatureSet,
    FeatureStoreError,
    Generator,
    PrototypeRecord,
    read_feature_file,
    sample_attribution_support,
    sample_support,
    split_train_val,
    write_feature_file,
)


# ---------------------------------------------------------------------------
# Record / set invariants
# ---------------------------------------------------------------------------


def test_record_rejects_non_finite():
    with pytest.raises(FeatureStoreError, match="non-finite feature"):
        PrototypeRecord(
            features=np.array([1.0, np.nan], dtype=np.float32),
            authenticity=Authenticity.REAL,
            generator=None,
            image_id="x",
        )


def test_record_authenticity_generator_consistency():
    with pytest.raises(FeatureStoreError, match="authenticity/generator mismatch"):
        PrototypeRecord(np.ones(2, np.float32), Authenticity.REAL, Generator.ADM, "x")
    with pytest.raises(FeatureStoreError, match="authenticity/generator mismatch"):
        PrototypeRecord(np.ones(2, np.float32), Authenticity.FAKE, None, "x")


def test_record_class_hint_range():
    with pytest.raises(FeatureStoreError, match="class_hint out of range"):
        PrototypeRecord(np.ones(2, np.float32), Authenticity.REAL, None, "x", class_hint=1000)
    rec = PrototypeRecord(np.ones(2, np.float32), Authenticity.REAL, None, "x", class_hint=999)
    assert rec.class_hint == 999


def test_feature_set_invariants():
    rng = np.random.default_rng(0)
    recs = [make_record(i, 4, rng, real=True) for i in range(3)]
    with pytest.raises(FeatureStoreError, match="dim must be positive"):
        FeatureSet(0, "t", [])
    with pytest.raises(FeatureStoreError, match="expected 3"):
        FeatureSet(3, "t", recs)
    dup = recs + [recs[0]]
    with pytest.raises(FeatureStoreError, match="duplicate image_id"):
        FeatureSet(4, "t", dup)


def test_label_helpers():
    fset = random_feature_set(n=10, dim=3, seed=1)
    auth = fset.authenticity_labels()
    attr = fset.attribution_labels()
    assert auth.tolist() == [0] * 5 + [1] * 5
    assert all(attr[i] == 0 for i in range(5))
    for i in range(5, 10):
        name = fset.records[i].generator.value
        assert ATTRIBUTION_CLASSES[attr[i]] == name
    assert fset.matrix().shape == (10, 3)
    assert fset.matrix().dtype == np.float32


# ---------------------------------------------------------------------------
# FPRO serialization
# ---------------------------------------------------------------------------


def test_round_trip_small(tmp_path):
    fset = FeatureSet(
        dim=4,
        layer_tag="decoder_16_0",
        records=[
            PrototypeRecord(np.arange(4, dtype=np.float32), Authenticity.REAL, None, "a", 17),
            PrototypeRecord(-np.ones(4, np.float32), Authenticity.FAKE, Generator.GLIDE, "b"),
        ],
    )
    path = tmp_path / "s.fpro"
    n = write_feature_file(fset, path)
    assert n == path.stat().st_size
    assert read_feature_file(path) == fset


def test_round_trip_property(tmp_path):
    for seed in range(6):
        fset = random_feature_set(
            n=5 + 3 * seed, dim=2 + seed, seed=seed, real_fraction=0.3 + 0.1 * seed, hints=True
        )
        path = tmp_path / f"p{seed}.fpro"
        write_feature_file(fset, path)
        back = read_feature_file(path)
        assert back == fset
        assert back.dim == fset.dim and back.layer_tag == fset.layer_tag


def test_rewrite_byte_identical(tmp_path):
    fset = random_feature_set(n=64, dim=9, seed=5, hints=True)
    p1, p2 = tmp_path / "a.fpro", tmp_path / "b.fpro"
    write_feature_file(fset, p1)
    write_feature_file(read_feature_file(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_write_refuses_mutated_set(tmp_path):
    fset = random_feature_set(n=4, dim=3, seed=6)
    fset.records[0].features[1] = np.nan  # corrupt in place after validation
    with pytest.raises(FeatureStoreError, match="non-finite feature"):
        write_feature_file(fset, tmp_path / "bad.fpro")


def _valid_blob(tmp_path, **kw):
    fset = random_feature_set(**{"n": 6, "dim": 3, "seed": 7, **kw})
    path = tmp_path / "v.fpro"
    write_feature_file(fset, path)
    return bytearray(path.read_bytes()), path


def test_read_bad_magic(tmp_path):
    blob, path = _valid_blob(tmp_path)
    blob[:4] = b"JUNK"
    path.write_bytes(blob)
    with pytest.raises(FeatureStoreError, match="bad magic"):
        read_feature_file(path)


def test_read_unsupported_version(tmp_path):
    blob, path = _valid_blob(tmp_path)
    blob[4:6] = struct.pack("<H", 99)
    path.write_bytes(blob)
    with pytest.raises(FeatureStoreError, match="unsupported version 99"):
        read_feature_file(path)


def test_read_zero_dim(tmp_path):
    blob, path = _valid_blob(tmp_path)
    blob[6:10] = struct.pack("<I", 0)
    path.write_bytes(blob)
    with pytest.raises(FeatureStoreError, match="dim=0"):
        read_feature_file(path)


def test_read_truncated(tmp_path):
    blob, path = _valid_blob(tmp_path)
    path.write_bytes(blob[: len(blob) - 5])
    with pytest.raises(FeatureStoreError, match="truncated payload"):
        read_feature_file(path)


def test_read_corrupt_record_count(tmp_path):
    blob, path = _valid_blob(tmp_path)
    blob[10:18] = struct.pack("<Q", 10_000)
    path.write_bytes(blob)
    with pytest.raises(FeatureStoreError, match="truncated payload"):
        read_feature_file(path)


def test_read_trailing_bytes(tmp_path):
    blob, path = _valid_blob(tmp_path)
    path.write_bytes(bytes(blob) + b"\x00\x01")
    with pytest.raises(FeatureStoreError, match="trailing bytes"):
        read_feature_file(path)


def test_read_unknown_generator_name(tmp_path):
    # hand-build a file whose generator table names a generator we don't know
    header = b"FPRO" + struct.pack("<HIQ", 1, 2, 0)
    layer = struct.pack("<H", 1) + b"t"
    table = struct.pack("<H", 1) + struct.pack("<H", 4) + b"Nope"
    path = tmp_path / "u.fpro"
    path.write_bytes(header + layer + table)
    with pytest.raises(FeatureStoreError, match="unknown generator name"):
        read_feature_file(path)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def _big_mixed_set(n_real=10_000, n_fake=10_000, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_real):
        records.append(make_record(i, dim, rng, real=True))
    for i in range(n_fake):
        records.append(
            make_record(
                n_real + i, dim, rng, real=False,
                generator=GENERATOR_ORDER[i % len(GENERATOR_ORDER)],
            )
        )
    return FeatureSet(dim, "t", records)


def test_split_80_20_counts():
    fset = _big_mixed_set()
    pair = split_train_val(fset, 0.8, seed=42)
    assert len(pair.train) == 16_000
    assert len(pair.validation) == 4_000
    n_real_train = int(np.sum(pair.train.authenticity_labels() == 0))
    assert n_real_train == 8_000


def test_split_deterministic_and_disjoint():
    fset = random_feature_set(n=60, dim=3, seed=9)
    a = split_train_val(fset, 0.8, seed=5)
    b = split_train_val(fset, 0.8, seed=5)
    ids = lambda fs: [r.image_id for r in fs.records]
    assert ids(a.train) == ids(b.train) and ids(a.validation) == ids(b.validation)
    assert set(ids(a.train)).isdisjoint(ids(a.validation))
    assert sorted(ids(a.train) + ids(a.validation)) == sorted(ids(fset))
    c = split_train_val(fset, 0.8, seed=6)
    assert ids(c.train) != ids(a.train)  # different seed reshuffles


def test_split_small_strata():
    rng = np.random.default_rng(1)
    records = [make_record(i, 3, rng, real=True) for i in range(10)]
    records += [make_record(10 + i, 3, rng, real=False, generator=Generator.ADM) for i in range(10)]
    pair = split_train_val(FeatureSet(3, "t", records), 0.8, seed=0)
    train_auth = pair.train.authenticity_labels()
    assert int(np.sum(train_auth == 0)) == 8 and int(np.sum(train_auth == 1)) == 8
    assert len(pair.validation) == 4


def test_split_errors():
    fset = random_feature_set(n=20, dim=3, seed=2)
    with pytest.raises(FeatureStoreError, match="train_fraction"):
        split_train_val(fset, 1.0, seed=0)
    with pytest.raises(FeatureStoreError, match="train_fraction"):
        split_train_val(fset, 0.0, seed=0)
    rng = np.random.default_rng(3)
    lone = FeatureSet(3, "t", [make_record(0, 3, rng, real=True),
                               make_record(1, 3, rng, real=False, generator=Generator.ADM),
                               make_record(2, 3, rng, real=False, generator=Generator.ADM)])
    with pytest.raises(FeatureStoreError, match="need at least 2"):
        split_train_val(lone, 0.8, seed=0)


def test_split_extreme_fraction_keeps_both_sides():
    fset = random_feature_set(n=10, dim=3, seed=4, real_fraction=1.0)
    pair = split_train_val(fset, 0.999, seed=0)
    assert len(pair.validation) >= 1
    pair = split_train_val(fset, 0.001, seed=0)
    assert len(pair.train) >= 1


# ---------------------------------------------------------------------------
# Support sampling
# ---------------------------------------------------------------------------


def test_sample_support_balance_and_grid():
    fset = _big_mixed_set(n_real=1200, n_fake=1200, dim=3, seed=5)
    for size in (4, 100, 2000):
        sup = sample_support(fset, size, seed=0)
        counts = np.bincount(sup.labels, minlength=2)
        assert counts.tolist() == [size // 2, size // 2]
        assert sup.features.shape == (size, 3)
        # without replacement: all rows distinct
        assert len(np.unique(sup.features, axis=0)) == size


def test_sample_support_deterministic():
    fset = _big_mixed_set(n_real=50, n_fake=50, dim=3, seed=6)
    a = sample_support(fset, 20, seed=3)
    b = sample_support(fset, 20, seed=3)
    c = sample_support(fset, 20, seed=4)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)
    d = sample_support(fset, 20, seed=(3, 1))  # tuple seeds draw a different stream
    assert not np.array_equal(a.features, d.features)


def test_sample_support_errors():
    fset = random_feature_set(n=10, dim=3, seed=7, real_fraction=0.2)  # 2 real, 8 fake
    with pytest.raises(FeatureStoreError, match="positive even"):
        sample_support(fset, 5, seed=0)
    with pytest.raises(FeatureStoreError, match="need 3 real"):
        sample_support(fset, 6, seed=0)


def _class_sets(per_class=12, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    sets = []
    for ci, name in enumerate(ATTRIBUTION_CLASSES):
        records = []
        for i in range(per_class):
            real = name == "Real"
            gen = None if real else Generator(name)
            records.append(
                PrototypeRecord(
                    rng.standard_normal(dim).astype(np.float32),
                    Authenticity.REAL if real else Authenticity.FAKE,
                    gen,
                    f"{name}-{i}",
                )
            )
        sets.append(FeatureSet(dim, "t", records))
    return sets


def test_sample_attribution_support():
    sets = _class_sets()
    sup = sample_attribution_support(sets, 18, seed=0)
    counts = np.bincount(sup.labels, minlength=9)
    assert counts.tolist() == [2] * 9
    assert sup.class_names == ATTRIBUTION_CLASSES
    sup2 = sample_attribution_support(sets, 18, seed=0)
    assert np.array_equal(sup.features, sup2.features)


def test_sample_attribution_errors():
    sets = _class_sets()
    with pytest.raises(FeatureStoreError, match="not divisible by 9"):
        sample_attribution_support(sets, 20, seed=0)
    with pytest.raises(FeatureStoreError, match="need 100"):
        sample_attribution_support(sets, 900, seed=0)
    with pytest.raises(FeatureStoreError, match="expected 9 class sets"):
        sample_attribution_support(sets[:5], 18, seed=0)
    shuffled = [sets[1], sets[0], *sets[2:]]
    with pytest.raises(FeatureStoreError, match="not labeled"):
        sample_attribution_support(shuffled, 18, seed=0)


def test_grid_constants():
    assert len(DETECTION_SUPPORT_SIZES) == 17
    assert DETECTION_SUPPORT_SIZES[0] == 4 and DETECTION_SUPPORT_SIZES[-1] == 2000
    assert len(ATTRIBUTION_SUPPORT_SIZES) == 17
    assert ATTRIBUTION_SUPPORT_SIZES[0] == 18 and ATTRIBUTION_SUPPORT_SIZES[-1] == 9000
    assert all(s % 9 == 0 for s in ATTRIBUTION_SUPPORT_SIZES)
    assert len(DETECTION_K_GRID) == 24
    assert DETECTION_K_GRID[0] == 1 and DETECTION_K_GRID[-1] == 101
    assert all(k % 2 == 1 for k in DETECTION_K_GRID)
