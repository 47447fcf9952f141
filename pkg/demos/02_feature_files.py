#!/usr/bin/env python3
"""Feature files on disk: write, read back, split, and sample supports.

The FPRO format stores one header (dim, layer tag, generator names) and a
flat list of records, each a D-vector of f32 features plus labels. Files
round-trip exactly, so pipelines can be replayed byte for byte.
"""

import tempfile
from pathlib import Path

from genprint import read_feature_file, sample_support, split_train_val, write_feature_file
from genprint.synthetic import generate, grid_world

# a small calibrated world stands in for extracted features
spec = grid_world(dim=16, separation=6.0, samples_per_class=40, seed=3)
sets = generate(spec)
print("classes:", ", ".join(sets))

adm = sets["ADM"]
real = sets["Real"]
print("ADM set: dim", adm.dim, "records", len(adm.records), "layer", adm.layer_tag)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "adm.fpro"
    n = write_feature_file(adm, path)
    print("wrote", n, "bytes")

    again = read_feature_file(path)
    assert again.dim == adm.dim
    assert len(again.records) == len(adm.records)
    assert again.records[0].features.tolist() == adm.records[0].features.tolist()
    print("round trip ok, first id:", again.records[0].image_id)

    # byte-identical rewrite
    path2 = Path(tmp) / "adm2.fpro"
    write_feature_file(again, path2)
    assert path.read_bytes() == path2.read_bytes()
    print("rewrite is byte-identical")

# deterministic stratified 80/20 split
pair = split_train_val(adm, 0.8, seed=1)
print("split:", len(pair.train.records), "train /", len(pair.validation.records), "val")
ids_t = {r.image_id for r in pair.train.records}
ids_v = {r.image_id for r in pair.validation.records}
assert not ids_t & ids_v

# balanced real/fake support for the detector: label 0 is real, 1 is fake
mixed = adm.__class__(adm.dim, adm.layer_tag, list(real.records) + list(adm.records))
support = sample_support(mixed, 16, seed=0)
reals = int((support.labels == 0).sum())
print("support of 16:", reals, "real +", int((support.labels == 1).sum()), "fake")
