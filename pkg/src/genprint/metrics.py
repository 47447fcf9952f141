"""Distance functions for prototype comparison.

Four metrics: Euclidean, Manhattan, Cosine (1 - cosine similarity), and
Correlation (1 - Pearson correlation). All arithmetic accumulates in float64
regardless of input dtype; prototype files store float32 and 32-bit
accumulation over ~10^3 dimensions loses precision we rely on.

Degenerate inputs never raise: a zero vector under Cosine and a constant
vector under Correlation both yield distance 1.0, treating an uninformative
vector as neutrally far so NaNs cannot leak into downstream votes.

Support-side work (float64 cast, squared norms, centering, normalization)
depends only on the support matrix, so it is factored into `prepare_support`
and reused across queries. `pairwise_distances` is the one-shot convenience
wrapper over the same code path, so both routes give bitwise-equal results.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class DistanceMetric(Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    COSINE = "cosine"
    CORRELATION = "correlation"


ALL_METRICS = (
    DistanceMetric.EUCLIDEAN,
    DistanceMetric.MANHATTAN,
    DistanceMetric.COSINE,
    DistanceMetric.CORRELATION,
)


def _as64(v: np.ndarray) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError("vectors must be 1-D with length >= 2")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite value in vector")
    return arr


def distance(a: np.ndarray, b: np.ndarray, metric: DistanceMetric) -> float:
    """Distance between two equal-length finite vectors; always >= 0."""
    x = _as64(a)
    y = _as64(b)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")

    if metric is DistanceMetric.EUCLIDEAN:
        d = x - y
        return float(np.sqrt(np.dot(d, d)))
    if metric is DistanceMetric.MANHATTAN:
        return float(np.sum(np.abs(x - y)))
    if metric is DistanceMetric.COSINE:
        nx = np.sqrt(np.dot(x, x))
        ny = np.sqrt(np.dot(y, y))
        if nx == 0.0 or ny == 0.0:
            return 1.0
        sim = np.dot(x, y) / (nx * ny)
        return float(1.0 - np.clip(sim, -1.0, 1.0))
    if metric is DistanceMetric.CORRELATION:
        xc = x - x.mean()
        yc = y - y.mean()
        nx = np.sqrt(np.dot(xc, xc))
        ny = np.sqrt(np.dot(yc, yc))
        if nx == 0.0 or ny == 0.0:
            return 1.0
        rho = np.dot(xc, yc) / (nx * ny)
        return float(1.0 - np.clip(rho, -1.0, 1.0))
    raise ValueError(f"unknown metric {metric!r}")


def _checked_matrix(rows: np.ndarray) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if arr.shape[1] < 2:
        raise ValueError("vectors must have length >= 2")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite value in vector")
    return arr


def _unit_rows(rows: np.ndarray, center: bool) -> np.ndarray:
    """Rows scaled to unit norm; degenerate rows become zero vectors.

    A zero row contributes similarity 0 to every pairing, which turns into
    distance 1.0 after `1 - sim`, matching the scalar degenerate rule without
    any masking.
    """
    if center:
        rows = rows - rows.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(rows * rows, axis=1, keepdims=True))
    return rows / np.where(norms == 0.0, 1.0, norms)


@dataclass
class PreparedSupport:
    """Support matrix with metric-specific precomputation baked in.

    `matrix` is float64: raw rows for Euclidean/Manhattan, unit rows for
    Cosine, centered unit rows for Correlation. `sq_norms` is only set for
    Euclidean. Treat instances as immutable.
    """

    metric: DistanceMetric
    matrix: np.ndarray
    sq_norms: np.ndarray | None

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]


def prepare_support(support: np.ndarray, metric: DistanceMetric) -> PreparedSupport:
    """Do the query-independent half of the distance computation once."""
    s = _checked_matrix(support)
    if metric is DistanceMetric.EUCLIDEAN:
        return PreparedSupport(metric, s, np.sum(s * s, axis=1))
    if metric is DistanceMetric.MANHATTAN:
        return PreparedSupport(metric, s, None)
    if metric is DistanceMetric.COSINE:
        return PreparedSupport(metric, _unit_rows(s, center=False), None)
    if metric is DistanceMetric.CORRELATION:
        return PreparedSupport(metric, _unit_rows(s, center=True), None)
    raise ValueError(f"unknown metric {metric!r}")


def prepared_distances(queries: np.ndarray, prepared: PreparedSupport) -> np.ndarray:
    """(Q, D) queries against a prepared support -> (Q, S) float64 distances."""
    q = _checked_matrix(queries)
    s = prepared.matrix
    if q.shape[1] != s.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[1]} vs {s.shape[1]}")

    metric = prepared.metric
    if metric is DistanceMetric.EUCLIDEAN:
        qq = np.sum(q * q, axis=1)[:, None]
        sq = qq + prepared.sq_norms[None, :] - 2.0 * (q @ s.T)
        np.maximum(sq, 0.0, out=sq)  # tiny negatives from cancellation
        return np.sqrt(sq)
    if metric is DistanceMetric.MANHATTAN:
        return _manhattan(q, s)
    if metric is DistanceMetric.COSINE:
        sim = _unit_rows(q, center=False) @ s.T
    elif metric is DistanceMetric.CORRELATION:
        sim = _unit_rows(q, center=True) @ s.T
    else:
        raise ValueError(f"unknown metric {metric!r}")
    np.clip(sim, -1.0, 1.0, out=sim)
    return 1.0 - sim


def _manhattan(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    out = np.empty((q.shape[0], s.shape[0]))
    if q.shape[0] == 1:
        # single query: walk the support in cache-sized blocks, reusing one buffer
        step = max(1, 262144 // max(1, s.shape[1]))
        buf = np.empty((min(step, s.shape[0]), s.shape[1]))
        for lo in range(0, s.shape[0], step):
            hi = min(lo + step, s.shape[0])
            block = buf[: hi - lo]
            np.subtract(s[lo:hi], q[0], out=block)
            np.abs(block, out=block)
            out[0, lo:hi] = block.sum(axis=1)
        return out
    # chunk the queries so the (chunk, S, D) broadcast stays in cache
    step = max(1, int(4e6 // max(1, s.shape[0] * s.shape[1])))
    for lo in range(0, q.shape[0], step):
        hi = min(lo + step, q.shape[0])
        out[lo:hi] = np.sum(np.abs(q[lo:hi, None, :] - s[None, :, :]), axis=2)
    return out


def pairwise_distances(
    queries: np.ndarray, support: np.ndarray, metric: DistanceMetric
) -> np.ndarray:
    """(Q, D) x (S, D) -> (Q, S) distance matrix, float64.

    Same semantics as `distance` applied to every pair, vectorized. Row i,
    column j holds distance(queries[i], support[j], metric).
    """
    return prepared_distances(queries, prepare_support(support, metric))
