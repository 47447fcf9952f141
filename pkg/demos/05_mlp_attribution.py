#!/usr/bin/env python3
"""Source attribution: which generator made this image?

A small MLP maps a prototype to one of nine classes (real plus eight
generators). Training uses AdamW with early stopping on validation
accuracy; the returned weights are the snapshot from the best epoch.
"""

import numpy as np

from genprint import ATTRIBUTION_CLASSES
from genprint.evaluation import confusion, emit_report
from genprint.feature_store import split_train_val
from genprint.neural import (
    MlpArchitecture,
    OUTPUT_SOFTMAX,
    TrainConfig,
    evaluate_accuracy,
    init_model,
    linear_probe,
    predict,
    train_arrays,
)
from genprint.synthetic import generate, grid_world

spec = grid_world(dim=32, separation=6.0, samples_per_class=80, seed=11)
sets = generate(spec)

splits = [split_train_val(sets[name], 0.8, seed=1) for name in ATTRIBUTION_CLASSES]


def stack(parts):
    # class index = position in ATTRIBUTION_CLASSES, Real is 0
    feats = np.vstack([np.stack([r.features for r in p.records]) for p in parts])
    labels = np.concatenate([np.full(len(p.records), i) for i, p in enumerate(parts)])
    return feats.astype(np.float64), labels


x_tr, y_tr = stack([s.train for s in splits])
x_va, y_va = stack([s.validation for s in splits])

arch = MlpArchitecture(input_dim=32, hidden=(64,), output_units=9, output_kind=OUTPUT_SOFTMAX)
model = init_model(arch, seed=11)
cfg = TrainConfig(learning_rate=0.05, batch_size=32, patience=15, max_epochs=120, seed=11)

trained, hist = train_arrays(model, x_tr, y_tr, x_va, y_va, cfg)
print(f"stopped at epoch {hist.stopped_epoch} (best {hist.best_epoch}, reason {hist.stop_reason})")
print(f"best validation accuracy {100.0 * max(hist.val_accuracy):.2f}%")

acc = evaluate_accuracy(trained, x_va, y_va)
print(f"restored-weights validation accuracy {100.0 * acc:.2f}%")

# confusion matrix from the trained attributor
vals = [s.validation for s in splits]
cm = confusion(lambda feats: predict(trained, feats), vals)
print()
print(emit_report(cm, format="md"))

# a linear probe (no hidden layers) measures raw feature separability
adm_pair = split_train_val(sets["ADM"], 0.8, seed=1)
real_pair = split_train_val(sets["Real"], 0.8, seed=1)


def merge(a, b):
    recs = list(a.records) + list(b.records)
    return a.__class__(a.dim, a.layer_tag, recs)


probe_cfg = TrainConfig(learning_rate=0.05, batch_size=32, patience=15, max_epochs=120, seed=11)
probe, probe_acc = linear_probe(merge(real_pair.train, adm_pair.train),
                                merge(real_pair.validation, adm_pair.validation), probe_cfg)
print(f"linear probe real-vs-ADM: {100.0 * probe_acc:.2f}%")
