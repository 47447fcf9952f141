#!/usr/bin/env python3
"""Tour of the four distance metrics used by the k-NN detector."""

import numpy as np

from genprint import ALL_METRICS, DistanceMetric, distance, pairwise_distances

a = np.array([1.0, 2.0, 3.0])
b = np.array([3.0, 2.0, 1.0])

print("distances between", a, "and", b)
for metric in ALL_METRICS:
    print(f"  {metric.value:<12} {distance(a, b, metric):.6f}")

# correlation distance is 1 - Pearson, so perfectly anti-correlated
# vectors sit at the maximum distance of 2
assert abs(distance(a, b, DistanceMetric.CORRELATION) - 2.0) < 1e-9

# cosine ignores positive scaling, correlation also ignores offsets
x = np.array([0.3, -1.2, 0.8, 2.0])
y = np.array([1.0, 0.4, -0.6, 1.1])
print("\ninvariances on a random-ish pair")
print("  cosine(x, y)          ", distance(x, y, DistanceMetric.COSINE))
print("  cosine(5x, y)         ", distance(5 * x, y, DistanceMetric.COSINE))
print("  correlation(x, y)     ", distance(x, y, DistanceMetric.CORRELATION))
print("  correlation(3x+7, y)  ", distance(3 * x + 7, y, DistanceMetric.CORRELATION))

# degenerate inputs resolve to the neutral distance 1.0 instead of NaN
zero = np.zeros(4)
flat = np.full(4, 2.5)
print("\ndegenerate cases")
print("  cosine(0, y)       ", distance(zero, y, DistanceMetric.COSINE))
print("  correlation(c, y)  ", distance(flat, y, DistanceMetric.CORRELATION))

# pairwise_distances computes a full query-by-support matrix in one call
rng = np.random.default_rng(0)
queries = rng.standard_normal((3, 8))
support = rng.standard_normal((5, 8))
d = pairwise_distances(queries, support, DistanceMetric.EUCLIDEAN)
print("\npairwise matrix shape", d.shape)
print(np.round(d, 3))
