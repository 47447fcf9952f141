#!/usr/bin/env python3
"""Hyperparameter grids for the k-NN detector and the 9-way attributor.

A grid cell is (metric, support size, k). Cells where k exceeds the
per-class share of the support are infeasible and stay blank. Results are
deterministic for a fixed seed and independent of the worker count.
"""

from genprint import ATTRIBUTION_CLASSES, DistanceMetric
from genprint.evaluation import (
    emit_report,
    grid_search_knn_attribution,
    grid_search_knn_detection,
)
from genprint.feature_store import split_train_val
from genprint.synthetic import detection_pairs, generate, grid_world

spec = grid_world(dim=32, separation=6.0, samples_per_class=80, seed=11)
sets = generate(spec)

# detection grid over two metrics, three sizes, three ks
train_sets, val_sets = {}, {}
for name, fset in detection_pairs(sets).items():
    split = split_train_val(fset, 0.8, seed=1)
    train_sets[name], val_sets[name] = split.train, split.validation

grid = grid_search_knn_detection(
    train_sets, val_sets,
    metrics=(DistanceMetric.EUCLIDEAN, DistanceMetric.COSINE),
    sizes=(16, 32, 64), ks=(1, 5, 9), seed=0,
)
print(emit_report(grid, format="md"))

best = grid.best()
print(f"best detection cell: metric={best.metric} |S|={best.support_size} "
      f"k={best.k} -> {best.accuracy:.2f}%")

# attribution grid: nine classes share one support, so k must fit size//9
class_train, class_val = [], []
for name in ATTRIBUTION_CLASSES:
    split = split_train_val(sets[name], 0.8, seed=1)
    class_train.append(split.train)
    class_val.append(split.validation)

agrid = grid_search_knn_attribution(
    class_train, class_val, sizes=(18, 45, 90), ks=(1, 3, 5),
    metric=DistanceMetric.EUCLIDEAN, seed=0,
)
print()
print(emit_report(agrid, format="md"))
