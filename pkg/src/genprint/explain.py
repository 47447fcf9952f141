"""Gradient-based feature attribution over trained models, plus rankings.

Attribution for one (input, class) pair is a Monte-Carlo path integral: draws
of (background point b, interpolation alpha) score (x - b) * d logit_c / dx
evaluated at b + alpha (x - b). Two design choices tighten the estimator:

- Backgrounds are covered round-robin and each background's draws are
  averaged before averaging across backgrounds. For a linear model the
  estimate then equals w * (x - mean(background)) exactly, for every seed
  and sample count, because the gradient is constant along each path.
- Alphas are stratified per background (one jittered draw per equal-width
  bin), staying uniform marginally while cutting path-integration variance.

The differentiated target is the pre-softmax logit, so linearity of the
underlying network is inherited by the attributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .neural import MlpModel, logit_input_gradients, logits


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def expected_gradients(
    model: MlpModel,
    x: np.ndarray,
    class_index: int,
    background: np.ndarray,
    n_samples: int = 200,
    seed: int = 0,
) -> np.ndarray:
    """Attribution vector (D,) for one input and one output class.

    `n_samples` is the total draw budget; when it is below the background
    count every background still contributes one draw (the budget rounds up
    so the full-background mean stays exact).
    """
    x = np.asarray(x, dtype=np.float64)
    bg = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if x.ndim != 1:
        raise ValueError("x must be a single vector")
    if bg.shape[0] == 0:
        raise ValueError("empty background")
    if bg.shape[1] != x.shape[0]:
        raise ValueError("background dimension mismatch")
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")

    rng = np.random.default_rng(_seed_list(seed))
    n_bg = bg.shape[0]
    base, rem = divmod(n_samples, n_bg)
    draws = np.full(n_bg, max(base, 1), dtype=np.int64)
    if base >= 1 and rem:
        extra = rng.permutation(n_bg)[:rem]
        draws[extra] += 1

    # Build every interpolation point, then one batched gradient pass.
    rows = np.repeat(np.arange(n_bg), draws)
    alphas = np.empty(rows.shape[0])
    weights = np.empty(rows.shape[0])
    pos = 0
    for b_idx in range(n_bg):
        m = draws[b_idx]
        alphas[pos : pos + m] = (np.arange(m) + rng.random(m)) / m
        weights[pos : pos + m] = 1.0 / (n_bg * m)
        pos += m

    diffs = x[None, :] - bg[rows]  # (T, D)
    points = bg[rows] + alphas[:, None] * diffs
    grads = logit_input_gradients(model, points, class_index)  # (T, D)
    return np.sum(weights[:, None] * diffs * grads, axis=0)


def expected_gradients_batch(
    model: MlpModel,
    xs: np.ndarray,
    class_index: int,
    background: np.ndarray,
    n_samples: int = 200,
    seed: int = 0,
) -> np.ndarray:
    """Attributions for many inputs, (N, D); row i uses seed sequence (seed, i).

    Per-row seeding makes the result independent of evaluation order, so
    parallel callers and the serial path agree bit for bit.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        out[i] = expected_gradients(
            model, xs[i], class_index, background, n_samples, seed=[*_seed_list(seed), i]
        )
    return out


def completeness_gap(
    model: MlpModel,
    x: np.ndarray,
    class_index: int,
    background: np.ndarray,
    attribution: np.ndarray,
) -> tuple[float, float]:
    """(sum-of-attributions error, exact output delta) for one input.

    The exact delta is logit_c(x) - mean_b logit_c(b); a faithful attribution
    sums to it.
    """
    bg = np.atleast_2d(np.asarray(background, dtype=np.float64))
    fx = float(logits(model, np.asarray(x, dtype=np.float64)[None, :])[0, class_index])
    fb = float(np.mean(logits(model, bg)[:, class_index]))
    delta = fx - fb
    return float(np.sum(attribution)) - delta, delta


@dataclass
class TopKReport:
    """Per-class strongest features and how much classes share them."""

    class_names: tuple[str, ...]
    indices: np.ndarray  # (C, k) int: feature ids, strongest first
    scores: np.ndarray  # (C, k) float: mean |attribution|
    overlap: np.ndarray  # (C, C) float percentages

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.overlap = np.asarray(self.overlap, dtype=np.float64)
        c, k = self.indices.shape
        if c != len(self.class_names) or self.scores.shape != (c, k):
            raise ValueError("shape mismatch in report")
        for row in self.indices:
            if len(set(row.tolist())) != k:
                raise ValueError("duplicate feature index within a class")
        if self.overlap.shape != (c, c):
            raise ValueError("overlap must be square")
        if not np.allclose(np.diag(self.overlap), 100.0):
            raise ValueError("overlap diagonal must be 100")
        if not np.array_equal(self.overlap, self.overlap.T):
            raise ValueError("overlap must be symmetric")

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def top_k_per_class(
    attributions_by_class: list[np.ndarray],
    class_names: tuple[str, ...],
    k: int = 10,
) -> TopKReport:
    """Rank features by mean absolute attribution within each class.

    Ties rank by feature index (stable). Overlap cell (i, j) is the top-k
    intersection size as a percentage.
    """
    if len(attributions_by_class) != len(class_names):
        raise ValueError("one attribution matrix per class required")
    indices = []
    scores = []
    for attr in attributions_by_class:
        attr = np.atleast_2d(np.asarray(attr, dtype=np.float64))
        if attr.shape[1] < k:
            raise ValueError(f"only {attr.shape[1]} features, need {k}")
        strength = np.mean(np.abs(attr), axis=0)
        order = np.argsort(-strength, kind="stable")[:k]
        indices.append(order)
        scores.append(strength[order])
    indices = np.stack(indices)
    scores = np.stack(scores)

    c = len(class_names)
    overlap = np.empty((c, c))
    sets = [set(row.tolist()) for row in indices]
    for i in range(c):
        for j in range(c):
            overlap[i, j] = 100.0 * len(sets[i] & sets[j]) / k
    return TopKReport(tuple(class_names), indices, scores, overlap)


def sign_agreement(
    features: list[int] | np.ndarray,
    attributions_a: np.ndarray,
    attributions_b: np.ndarray,
) -> np.ndarray:
    """Per-feature fraction of samples whose attribution sign matches.

    Both attribution matrices must cover the same samples (rows align);
    use this on features shared between two classes' top-k lists.
    """
    a = np.atleast_2d(np.asarray(attributions_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(attributions_b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError("attribution matrices must align sample-for-sample")
    feats = np.asarray(features, dtype=np.int64)
    return np.mean(np.sign(a[:, feats]) == np.sign(b[:, feats]), axis=0)


def report_json(
    report: TopKReport,
    sign_table: dict[str, dict[str, float]] | None = None,
) -> str:
    """Serialize ranking + overlap (+ optional sign agreement) as stable JSON."""
    payload = {
        "classes": list(report.class_names),
        "top_features": {
            name: [
                {"feature": int(f), "mean_abs_attribution": float(s)}
                for f, s in zip(report.indices[i], report.scores[i])
            ]
            for i, name in enumerate(report.class_names)
        },
        "overlap_percent": {
            name: {
                other: float(report.overlap[i, j])
                for j, other in enumerate(report.class_names)
            }
            for i, name in enumerate(report.class_names)
        },
    }
    if sign_table is not None:
        payload["sign_agreement"] = sign_table
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def beeswarm_csv(
    samples: np.ndarray, attributions: np.ndarray, features: list[int] | np.ndarray
) -> str:
    """Long-format plot data: one row per (feature, sample) pair.

    Columns: feature index, the sample's raw feature value, its attribution.
    """
    xs = np.atleast_2d(np.asarray(samples))
    at = np.atleast_2d(np.asarray(attributions))
    if xs.shape != at.shape:
        raise ValueError("samples and attributions must align")
    lines = ["feature,value,attribution"]
    for f in features:
        f = int(f)
        for s in range(xs.shape[0]):
            lines.append(f"{f},{float(xs[s, f])!r},{float(at[s, f])!r}")
    return "\n".join(lines) + "\n"
