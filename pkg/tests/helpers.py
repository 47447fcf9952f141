"""Independent oracles used by several test modules.

These deliberately avoid the library's own code paths: scipy for distances,
plain python sorting and counting for k-NN, and loops for numeric checks.
"""

import numpy as np
from scipy.spatial.distance import cdist

from genprint.metrics import DistanceMetric

_SCIPY_NAME = {
    DistanceMetric.EUCLIDEAN: "euclidean",
    DistanceMetric.MANHATTAN: "cityblock",
    DistanceMetric.COSINE: "cosine",
    DistanceMetric.CORRELATION: "correlation",
}


def oracle_distances(queries, support, metric):
    """scipy-based (Q, S) distance matrix."""
    return cdist(np.atleast_2d(queries), np.atleast_2d(support), _SCIPY_NAME[metric])


def oracle_knn(query, support_features, support_labels, class_count, k, metric):
    """Naive k-NN: full sort, majority vote, distance-sum then index tie rule."""
    dists = oracle_distances(query[None, :], support_features, metric)[0]
    order = sorted(range(len(dists)), key=lambda j: (dists[j], j))
    votes = [0] * class_count
    sums = [0.0] * class_count
    for j in order[:k]:
        votes[int(support_labels[j])] += 1
        sums[int(support_labels[j])] += float(dists[j])
    top = max(votes)
    tied = [c for c in range(class_count) if votes[c] == top]
    tied.sort(key=lambda c: (sums[c], c))
    return tied[0], votes


def oracle_knn_multi(query, support_features, support_labels, class_count, ks, metric):
    """Same naive rule evaluated at several k values in one sorted pass."""
    dists = oracle_distances(query[None, :], support_features, metric)[0]
    order = sorted(range(len(dists)), key=lambda j: (dists[j], j))
    votes = [0] * class_count
    sums = [0.0] * class_count
    out = {}
    want = sorted(set(ks))
    pos = 0
    for k in want:
        while pos < k:
            j = order[pos]
            votes[int(support_labels[j])] += 1
            sums[int(support_labels[j])] += float(dists[j])
            pos += 1
        top = max(votes)
        tied = [c for c in range(class_count) if votes[c] == top]
        tied.sort(key=lambda c: (sums[c], c))
        out[k] = (tied[0], list(votes))
    return out


def fd_gradients(value_fn, params, h=1e-5):
    """Central finite differences of a scalar function over a list of arrays."""
    grads = []
    for p in params:
        g = np.zeros_like(p, dtype=np.float64)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            keep = p[idx]
            p[idx] = keep + h
            up = value_fn()
            p[idx] = keep - h
            down = value_fn()
            p[idx] = keep
            g[idx] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / scale
