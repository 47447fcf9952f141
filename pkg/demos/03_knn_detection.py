#!/usr/bin/env python3
"""Training-free real/fake detection with a k-NN vote over prototypes.

There is no fitting step. A balanced support set of labeled vectors is the
whole "model"; queries are classified by majority vote among their k nearest
neighbors under a chosen distance.
"""

import numpy as np

from genprint import DistanceMetric, KnnConfig, knn_predict, knn_predict_batch, sample_support
from genprint.evaluation import emit_report, knn_detection_matrix
from genprint.feature_store import split_train_val
from genprint.synthetic import detection_pairs, generate, grid_world

spec = grid_world(dim=32, separation=6.0, samples_per_class=80, seed=11)
pairs = detection_pairs(generate(spec))

# each pair holds one generator's fakes mixed with a shared real pool
train_sets, val_sets = {}, {}
for name, fset in pairs.items():
    split = split_train_val(fset, 0.8, seed=1)
    train_sets[name], val_sets[name] = split.train, split.validation

support = sample_support(train_sets["Glide"], 64, seed=0)
cfg = KnnConfig(k=9, metric=DistanceMetric.EUCLIDEAN, support_size=64)

# single query with its vote breakdown
val = val_sets["Glide"]
q = val.records[0].features.astype(np.float64)
label, votes = knn_predict(q, support, cfg)
truth = val.records[0].authenticity.value
print("query", val.records[0].image_id, "-> label", label, "votes", votes.tolist(), "truth", truth)

# batch over the whole validation split
feats = np.stack([r.features for r in val.records]).astype(np.float64)
truths = np.array([r.authenticity.value for r in val.records])
preds, _ = knn_predict_batch(feats, support, cfg)
print(f"Glide val accuracy: {100.0 * (preds == truths).mean():.1f}% over {len(truths)} queries")

# cross-generator matrix: anchor the support on each generator in turn,
# score on every generator's validation split
matrix = knn_detection_matrix(train_sets, val_sets, support_size=64, k=9,
                              metric=DistanceMetric.EUCLIDEAN, seed=0)
print()
print(emit_report(matrix, format="md"))
