"""Cross-generator evaluation, hyperparameter grids, confusion matrices, reports.

The evaluation protocol: a classifier anchored to one generator (its support
set or training data come from that generator's subset) is scored on every
generator's balanced validation set, giving one matrix row; eight sources
give the full matrix and its grand mean ranks configurations.

Grid cells where k exceeds the per-class support count are infeasible; they
are recorded with a dash/empty accuracy rather than an error.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .feature_store import (
    ATTRIBUTION_CLASSES,
    GENERATOR_ORDER,
    FeatureSet,
    sample_attribution_support,
    sample_support,
)
from .knn import predict_multi_k
from .metrics import DistanceMetric

_GEN_RANK = {g.value: i for i, g in enumerate(GENERATOR_ORDER)}


def round1(x: float) -> str:
    """One-decimal string, ties away from zero (table presentation rule)."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def ordered_generator_names(names) -> tuple[str, ...]:
    """Canonical column order for whatever generator subset is present."""
    names = list(names)
    unknown = [n for n in names if n not in _GEN_RANK]
    if unknown:
        raise ValueError(f"unknown generator name(s): {unknown}")
    return tuple(sorted(names, key=_GEN_RANK.__getitem__))


def feasible_cell(support_size: int, k: int, class_count: int) -> bool:
    """A cell is runnable iff every class can supply k neighbors."""
    return k <= support_size // class_count


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


@dataclass
class EvalMatrix:
    """Accuracy percentages: rows = classifier source, columns = eval target."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    cells: np.ndarray  # (R, C) float64, values in [0, 100]

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("cell shape does not match labels")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() > 100):
            raise ValueError("accuracies must lie in [0, 100]")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EvalMatrix):
            return NotImplemented
        return (
            self.row_labels == other.row_labels
            and self.col_labels == other.col_labels
            and np.array_equal(self.cells, other.cells)
        )

    def row_means(self) -> np.ndarray:
        return self.cells.mean(axis=1)

    def col_means(self) -> np.ndarray:
        return self.cells.mean(axis=0)

    def grand_mean(self) -> float:
        return float(self.cells.mean())


def cross_generator_eval(classifier, val_sets: dict[str, FeatureSet]) -> tuple[tuple[str, ...], np.ndarray]:
    """One matrix row: a fixed classifier scored on every generator's set.

    `classifier` maps an (N, D) matrix to predicted authenticity labels.
    Returns (ordered target names, accuracy percentages).
    """
    names = ordered_generator_names(val_sets.keys())
    row = np.empty(len(names))
    for j, name in enumerate(names):
        fset = val_sets[name]
        preds = np.asarray(classifier(fset.matrix()))
        row[j] = float(np.mean(preds == fset.authenticity_labels())) * 100.0
    return names, row


def knn_detection_matrix(
    train_sets: dict[str, FeatureSet],
    val_sets: dict[str, FeatureSet],
    support_size: int,
    k: int,
    metric: DistanceMetric,
    seed: int,
) -> EvalMatrix:
    """Full cross-generator matrix for one k-NN configuration."""
    names = ordered_generator_names(train_sets.keys())
    if ordered_generator_names(val_sets.keys()) != names:
        raise ValueError("train and validation sets must cover the same generators")
    rows = []
    for gi, source in enumerate(names):
        support = sample_support(train_sets[source], support_size, (seed, gi))

        def classify(queries, _support=support):
            labels, _votes = predict_multi_k(queries, _support, [k], metric)[k]
            return labels

        rows.append(cross_generator_eval(classify, val_sets)[1])
    return EvalMatrix(names, names, np.stack(rows))


def mlp_detection_matrix(
    train_sets: dict[str, FeatureSet],
    val_sets: dict[str, FeatureSet],
    hidden: tuple[int, ...],
    config,
    progress=None,
) -> EvalMatrix:
    """Train one detection MLP per source generator, score it everywhere.

    Early stopping watches the source generator's own validation set; the
    cross-generator row is measured afterwards.
    """
    from . import neural

    names = ordered_generator_names(train_sets.keys())
    rows = []
    for gi, source in enumerate(names):
        arch = neural.MlpArchitecture(train_sets[source].dim, tuple(hidden), 2, neural.OUTPUT_SOFTMAX)
        seed = int(np.random.default_rng([config.seed, gi]).integers(2**63))
        model = neural.init_model(arch, seed)
        cfg = _reseed(config, seed)
        best, history = neural.train_early_stop(model, train_sets[source], val_sets[source], cfg)
        if progress is not None:
            progress(
                f"{source}: stopped epoch {history.stopped_epoch} "
                f"(best {history.best_epoch}, val {history.val_accuracy[history.best_epoch - 1]:.4f})"
            )
        rows.append(cross_generator_eval(lambda q, m=best: neural.predict(m, q), val_sets)[1])
    return EvalMatrix(names, names, np.stack(rows))


def _reseed(config, seed: int):
    from dataclasses import replace

    return replace(config, seed=seed)


# ---------------------------------------------------------------------------
# Grid searches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridCell:
    metric: str
    support_size: int
    k: int
    accuracy: float | None  # None iff infeasible
    feasible: bool

    def __post_init__(self) -> None:
        if self.feasible != (self.accuracy is not None):
            raise ValueError("feasible flag inconsistent with accuracy")


@dataclass
class GridResult:
    """Exhaustive (metric, support size, k) sweep with its argmax cell."""

    metrics: tuple[str, ...]
    sizes: tuple[int, ...]
    ks: tuple[int, ...]
    cells: list[GridCell]  # row-major: metric, then size, then k

    def best(self) -> GridCell:
        feasible = [c for c in self.cells if c.feasible]
        if not feasible:
            raise ValueError("no feasible cells in grid")
        top = max(c.accuracy for c in feasible)  # type: ignore[type-var]
        for c in feasible:  # first attaining cell: deterministic tie rule
            if c.accuracy == top:
                return c
        raise AssertionError("unreachable")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridResult):
            return NotImplemented
        return (
            self.metrics == other.metrics
            and self.sizes == other.sizes
            and self.ks == other.ks
            and self.cells == other.cells
        )


def _run_tasks(tasks, work, jobs: int) -> None:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(lambda t: work(*t), tasks))
    else:
        for t in tasks:
            work(*t)


def grid_search_knn_detection(
    train_sets: dict[str, FeatureSet],
    val_sets: dict[str, FeatureSet],
    metrics: tuple[DistanceMetric, ...],
    sizes: tuple[int, ...],
    ks: tuple[int, ...],
    seed: int,
    jobs: int = 1,
    progress=None,
) -> GridResult:
    """Exhaustive detection sweep; cell value = cross-generator grand mean.

    Each (source, size, metric) job computes one distance pass and reuses it
    for every k, writing into disjoint slices of a result tensor so the
    aggregate is independent of completion order.
    """
    names = ordered_generator_names(train_sets.keys())
    if ordered_generator_names(val_sets.keys()) != names:
        raise ValueError("train and validation sets must cover the same generators")
    sizes = tuple(sorted(sizes))
    ks = tuple(sorted(ks))
    acc = np.full((len(metrics), len(sizes), len(ks), len(names), len(names)), np.nan)

    val_mats = {n: val_sets[n].matrix() for n in names}
    val_labs = {n: val_sets[n].authenticity_labels() for n in names}

    def work(mi: int, si: int, gi: int) -> None:
        size = sizes[si]
        feas = [k for k in ks if feasible_cell(size, k, 2)]
        if not feas:
            return
        support = sample_support(train_sets[names[gi]], size, (seed, gi))
        for ti, tname in enumerate(names):
            preds = predict_multi_k(val_mats[tname], support, feas, metrics[mi])
            for ki, k in enumerate(ks):
                if k in preds:
                    labels, _ = preds[k]
                    acc[mi, si, ki, gi, ti] = float(np.mean(labels == val_labs[tname])) * 100.0
        if progress is not None:
            progress(f"grid: metric={metrics[mi].value} size={size} source={names[gi]}")

    tasks = [
        (mi, si, gi)
        for mi in range(len(metrics))
        for si in range(len(sizes))
        for gi in range(len(names))
    ]
    _run_tasks(tasks, work, jobs)

    cells: list[GridCell] = []
    for mi, metric in enumerate(metrics):
        for si, size in enumerate(sizes):
            for ki, k in enumerate(ks):
                if feasible_cell(size, k, 2):
                    cells.append(GridCell(metric.value, size, k, float(np.mean(acc[mi, si, ki])), True))
                else:
                    cells.append(GridCell(metric.value, size, k, None, False))
    return GridResult(tuple(m.value for m in metrics), sizes, ks, cells)


def grid_search_knn_attribution(
    class_train_sets: list[FeatureSet],
    class_val_sets: list[FeatureSet],
    sizes: tuple[int, ...],
    ks: tuple[int, ...],
    metric: DistanceMetric = DistanceMetric.CORRELATION,
    seed: int = 0,
    jobs: int = 1,
    progress=None,
) -> GridResult:
    """Support size x k sweep for 9-class attribution at a fixed metric.

    Class sets are ordered as ATTRIBUTION_CLASSES; accuracy is measured over
    the pooled validation sets.
    """
    n_classes = len(ATTRIBUTION_CLASSES)
    if len(class_train_sets) != n_classes or len(class_val_sets) != n_classes:
        raise ValueError(f"need {n_classes} train and validation class sets")
    sizes = tuple(sorted(sizes))
    ks = tuple(sorted(ks))
    queries = np.concatenate([s.matrix() for s in class_val_sets])
    target = np.concatenate([s.attribution_labels() for s in class_val_sets])
    acc = np.full((len(sizes), len(ks)), np.nan)

    def work(si: int) -> None:
        size = sizes[si]
        feas = [k for k in ks if feasible_cell(size, k, n_classes)]
        if not feas:
            return
        support = sample_attribution_support(class_train_sets, size, (seed,))
        preds = predict_multi_k(queries, support, feas, metric)
        for ki, k in enumerate(ks):
            if k in preds:
                labels, _ = preds[k]
                acc[si, ki] = float(np.mean(labels == target)) * 100.0
        if progress is not None:
            progress(f"grid: size={size} done")

    _run_tasks([(si,) for si in range(len(sizes))], work, jobs)

    cells: list[GridCell] = []
    for si, size in enumerate(sizes):
        for ki, k in enumerate(ks):
            if feasible_cell(size, k, n_classes):
                cells.append(GridCell(metric.value, size, k, float(acc[si, ki]), True))
            else:
                cells.append(GridCell(metric.value, size, k, None, False))
    return GridResult((metric.value,), sizes, ks, cells)


# ---------------------------------------------------------------------------
# Confusion
# ---------------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) int64: rows true class, columns predicted
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.class_names)
        if self.counts.shape != (c, c):
            raise ValueError("counts must be square over class_names")
        if self.counts.min() < 0:
            raise ValueError("negative count")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.class_names == other.class_names and np.array_equal(self.counts, other.counts)

    def per_class_recall(self) -> np.ndarray:
        totals = self.counts.sum(axis=1)
        safe = np.where(totals == 0, 1, totals)
        return np.where(totals == 0, np.nan, np.diag(self.counts) / safe)

    def overall_accuracy(self) -> float:
        total = self.counts.sum()
        if total == 0:
            raise ValueError("empty confusion matrix")
        return float(np.trace(self.counts) / total)


def confusion(attributor, test_sets: list[FeatureSet]) -> ConfusionMatrix:
    """Count (true, predicted) pairs; test_sets ordered as ATTRIBUTION_CLASSES."""
    n_classes = len(ATTRIBUTION_CLASSES)
    if len(test_sets) != n_classes:
        raise ValueError(f"need {n_classes} class sets")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for ci, fset in enumerate(test_sets):
        preds = np.asarray(attributor(fset.matrix()), dtype=np.int64)
        np.add.at(counts[ci], preds, 1)
    return ConfusionMatrix(counts, ATTRIBUTION_CLASSES)


# ---------------------------------------------------------------------------
# Report emission and parsing
# ---------------------------------------------------------------------------


def emit_report(obj, format: str = "md") -> str:
    """Render a matrix/grid/confusion result as markdown or CSV text.

    Markdown rounds to one decimal like the reference tables; CSV carries
    full float precision and parses back to an identical object.
    """
    if format not in ("md", "csv"):
        raise ValueError(f"unknown format {format!r}")
    if isinstance(obj, EvalMatrix):
        return _matrix_md(obj) if format == "md" else _matrix_csv(obj)
    if isinstance(obj, GridResult):
        return _grid_md(obj) if format == "md" else _grid_csv(obj)
    if isinstance(obj, ConfusionMatrix):
        return _confusion_md(obj) if format == "md" else _confusion_csv(obj)
    raise TypeError(f"cannot report a {type(obj).__name__}")


def _matrix_csv(m: EvalMatrix) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["source", "target", "accuracy"])
    for i, r in enumerate(m.row_labels):
        for j, c in enumerate(m.col_labels):
            w.writerow([r, c, repr(float(m.cells[i, j]))])
    return out.getvalue()


def parse_matrix_csv(text: str) -> EvalMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["source", "target", "accuracy"]:
        raise ValueError("not a matrix CSV: bad header")
    row_labels: list[str] = []
    col_labels: list[str] = []
    values: dict[tuple[str, str], float] = {}
    for source, target, accuracy in rows[1:]:
        if source not in row_labels:
            row_labels.append(source)
        if target not in col_labels:
            col_labels.append(target)
        values[(source, target)] = float(accuracy)
    cells = np.array([[values[(r, c)] for c in col_labels] for r in row_labels])
    return EvalMatrix(tuple(row_labels), tuple(col_labels), cells)


def _matrix_md(m: EvalMatrix) -> str:
    header = ["source \\ target", *m.col_labels, "Avg."]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for i, label in enumerate(m.row_labels):
        cells = [round1(v) for v in m.cells[i]]
        lines.append("| " + " | ".join([label, *cells, round1(m.row_means()[i])]) + " |")
    avg = [round1(v) for v in m.col_means()]
    lines.append("| " + " | ".join(["Avg.", *avg, round1(m.grand_mean())]) + " |")
    return "\n".join(lines) + "\n"


def _grid_csv(g: GridResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["metric", "support", "k", "accuracy", "feasible"])
    for c in g.cells:
        w.writerow([c.metric, c.support_size, c.k, "" if c.accuracy is None else repr(c.accuracy), str(c.feasible).lower()])
    return out.getvalue()


def parse_grid_csv(text: str) -> GridResult:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["metric", "support", "k", "accuracy", "feasible"]:
        raise ValueError("not a grid CSV: bad header")
    cells: list[GridCell] = []
    metrics: list[str] = []
    sizes: list[int] = []
    ks: list[int] = []
    for metric, support, k, accuracy, feasible in rows[1:]:
        cell = GridCell(metric, int(support), int(k), float(accuracy) if accuracy else None, feasible == "true")
        cells.append(cell)
        if metric not in metrics:
            metrics.append(metric)
        if cell.support_size not in sizes:
            sizes.append(cell.support_size)
        if cell.k not in ks:
            ks.append(cell.k)
    return GridResult(tuple(metrics), tuple(sizes), tuple(ks), cells)


def _grid_md(g: GridResult) -> str:
    by_key = {(c.metric, c.support_size, c.k): c for c in g.cells}
    lines: list[str] = []
    for metric in g.metrics:
        lines.append(f"### {metric}")
        header = ["|S| \\ k", *[str(k) for k in g.ks]]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for size in g.sizes:
            row = [str(size)]
            for k in g.ks:
                cell = by_key[(metric, size, k)]
                row.append("—" if cell.accuracy is None else round1(cell.accuracy))
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    best = g.best()
    lines.append(f"Best: metric={best.metric}, |S|={best.support_size}, k={best.k}, accuracy={round1(best.accuracy)}")
    return "\n".join(lines) + "\n"


def _confusion_csv(cm: ConfusionMatrix) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["true", "predicted", "count"])
    for i, r in enumerate(cm.class_names):
        for j, c in enumerate(cm.class_names):
            w.writerow([r, c, int(cm.counts[i, j])])
    return out.getvalue()


def parse_confusion_csv(text: str) -> ConfusionMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["true", "predicted", "count"]:
        raise ValueError("not a confusion CSV: bad header")
    names: list[str] = []
    values: dict[tuple[str, str], int] = {}
    for true, predicted, count in rows[1:]:
        if true not in names:
            names.append(true)
        values[(true, predicted)] = int(count)
    counts = np.array([[values[(r, c)] for c in names] for r in names], dtype=np.int64)
    return ConfusionMatrix(counts, tuple(names))


def _confusion_md(cm: ConfusionMatrix) -> str:
    header = ["true \\ predicted", *cm.class_names, "recall"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    recalls = cm.per_class_recall()
    for i, label in enumerate(cm.class_names):
        row = [label, *[str(int(v)) for v in cm.counts[i]]]
        row.append("n/a" if np.isnan(recalls[i]) else round1(100.0 * recalls[i]))
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    lines.append(f"Overall accuracy: {round1(100.0 * cm.overall_accuracy())}%")
    return "\n".join(lines) + "\n"
