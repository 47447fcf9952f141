"""Exact k-nearest-neighbor classification over balanced support sets.

Brute force by design: with at most ~9,000 support vectors of ~1,280
dimensions, one matrix product per query batch beats any index structure and
keeps results bit-for-bit reproducible. Distance ties at the k-th neighbor
resolve by support index (stable sort); vote ties resolve by smaller
cumulative neighbor distance, then by smaller class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import DistanceMetric, PreparedSupport, prepare_support, prepared_distances


@dataclass
class SupportSet:
    """Balanced labeled vectors the classifier votes over.

    Every class index in [0, class_count) appears the same number of times.
    Feature rows are treated as immutable after construction; metric-specific
    precomputation is cached on first use so repeated single-query calls do
    not redo the support-side work.
    """

    features: np.ndarray  # (S, D)
    labels: np.ndarray  # (S,) int
    class_count: int
    class_names: tuple[str, ...] | None = None
    _prepared: dict[DistanceMetric, PreparedSupport] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be (S, D)")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match feature rows")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if len(self.labels) == 0:
            raise ValueError("empty support set")
        counts = np.bincount(self.labels, minlength=self.class_count)
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise ValueError("label outside [0, class_count)")
        if len(set(counts.tolist())) != 1:
            raise ValueError(f"support set not balanced: per-class counts {counts.tolist()}")
        if self.class_names is not None and len(self.class_names) != self.class_count:
            raise ValueError("class_names length must equal class_count")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def prepared(self, metric: DistanceMetric) -> PreparedSupport:
        got = self._prepared.get(metric)
        if got is None:
            got = prepare_support(self.features, metric)
            self._prepared[metric] = got
        return got


@dataclass(frozen=True)
class KnnConfig:
    k: int
    metric: DistanceMetric
    support_size: int

    def __post_init__(self) -> None:
        if self.k <= 0 or self.k % 2 == 0:
            raise ValueError(f"k must be a positive odd integer, got {self.k}")
        if self.k > self.support_size:
            raise ValueError(f"k={self.k} exceeds support size {self.support_size}")


def tie_break(votes: np.ndarray, cumulative_distances: np.ndarray) -> int:
    """Pick among max-vote classes: smallest distance sum, then smallest index."""
    votes = np.asarray(votes)
    sums = np.asarray(cumulative_distances, dtype=np.float64)
    best = votes.max()
    score = np.where(votes == best, sums, np.inf)
    return int(np.argmin(score))  # argmin takes the first minimum: index fallback


def knn_predict(
    query: np.ndarray, support: SupportSet, config: KnnConfig
) -> tuple[int, np.ndarray]:
    """Classify one query vector; returns (label, per-class vote counts)."""
    q = np.asarray(query)
    if q.ndim != 1 or q.shape[0] != support.dim:
        raise ValueError(f"query must be a {support.dim}-vector")
    labels, votes = knn_predict_batch(q[None, :], support, config)
    return int(labels[0]), votes[0]


def knn_predict_batch(
    queries: np.ndarray, support: SupportSet, config: KnnConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Classify (Q, D) queries; returns (labels (Q,), votes (Q, C))."""
    if config.support_size != len(support):
        raise ValueError(
            f"config.support_size={config.support_size} but support has {len(support)} entries"
        )
    out = predict_multi_k(queries, support, [config.k], config.metric)
    return out[config.k]


def predict_multi_k(
    queries: np.ndarray,
    support: SupportSet,
    ks: list[int] | tuple[int, ...],
    metric: DistanceMetric,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Classify queries at several k values sharing one distance pass.

    Distances and the neighbor ordering are computed once; vote counts grow
    incrementally from one k to the next. Returns {k: (labels, votes)}.
    """
    qs = np.atleast_2d(np.asarray(queries))
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        raise ValueError("no k values given")
    if ks[0] <= 0:
        raise ValueError("k values must be positive")
    if ks[-1] > len(support):
        raise ValueError(f"k={ks[-1]} exceeds support size {len(support)}")

    dists = prepared_distances(qs, support.prepared(metric))  # (Q, S)
    order = np.argsort(dists, axis=1, kind="stable")  # index-stable at ties
    ranked_labels = support.labels[order]  # (Q, S)
    ranked_dists = np.take_along_axis(dists, order, axis=1)

    n_q = qs.shape[0]
    n_c = support.class_count
    rows = np.arange(n_q)
    votes = np.zeros((n_q, n_c), dtype=np.int64)
    dist_sums = np.zeros((n_q, n_c), dtype=np.float64)

    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    prev_k = 0
    for k in ks:
        for col in range(prev_k, k):
            lab = ranked_labels[:, col]
            votes[rows, lab] += 1
            dist_sums[rows, lab] += ranked_dists[:, col]
        prev_k = k

        best = votes.max(axis=1, keepdims=True)
        score = np.where(votes == best, dist_sums, np.inf)
        labels = np.argmin(score, axis=1).astype(np.int64)
        out[k] = (labels, votes.copy())
    return out
