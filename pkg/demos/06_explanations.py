#!/usr/bin/env python3
"""Which feature dimensions drive the attributor's decisions?

Expected gradients estimate Shapley-style attributions by averaging input
gradients along straight paths from background samples to the input. On a
linear model the estimate is exact: attribution = w * (x - mean background).
"""

import numpy as np

from genprint.explain import (
    completeness_gap,
    expected_gradients,
    report_json,
    sign_agreement,
    top_k_per_class,
)
from genprint.neural import MlpArchitecture, OUTPUT_SOFTMAX, forward, init_model

rng = np.random.default_rng(5)

# exactness on a linear model
lin = init_model(MlpArchitecture(8, (), 3, OUTPUT_SOFTMAX), seed=1, dtype=np.float64)
x = rng.standard_normal(8)
bg = rng.standard_normal((20, 8))
at = expected_gradients(lin, x, class_index=2, background=bg, n_samples=64, seed=0)
w = lin.weights[0][:, 2]
exact = w * (x - bg.mean(axis=0))
print("linear exactness, max abs err:", float(np.max(np.abs(at - exact))))

# completeness: attributions sum to logit(x) - mean logit(background)
mlp = init_model(MlpArchitecture(8, (16,), 3, OUTPUT_SOFTMAX), seed=2, dtype=np.float64)
at0 = expected_gradients(mlp, x, class_index=0, background=bg, n_samples=2000, seed=0)
gap, delta = completeness_gap(mlp, x, class_index=0, background=bg, attribution=at0)
print(f"logit delta {delta:+.4f}, completeness gap {gap:+.2e}")

# per-class top-k reports and their overlap
classes = ("Real", "GenA", "GenB")
per_class = [expected_gradients(mlp, x, class_index=c, background=bg,
                                n_samples=500, seed=c) for c in range(3)]
report = top_k_per_class(per_class, classes, k=3)
for name, feats in zip(report.class_names, report.indices):
    print(name, "top features:", [int(i) for i in feats])
print("overlap matrix (%):")
print(report.overlap)

# do two classes agree on the sign of shared features?
shared = sorted(set(report.indices[1]) & set(report.indices[2]))
if shared:
    agree = sign_agreement(shared, per_class[1], per_class[2])
    print("sign agreement on shared features:", agree.tolist())

# machine-readable report
print()
print(report_json(report)[:200], "...")
