"""Cross-generator matrices, grid sweeps, confusion counts, report round trips."""

import numpy as np
import pytest

from genprint import synthetic
from genprint.evaluation import (
    ConfusionMatrix,
    EvalMatrix,
    GridCell,
    GridResult,
    confusion,
    cross_generator_eval,
    emit_report,
    feasible_cell,
    grid_search_knn_attribution,
    grid_search_knn_detection,
    knn_detection_matrix,
    mlp_detection_matrix,
    ordered_generator_names,
    parse_confusion_csv,
    parse_grid_csv,
    parse_matrix_csv,
    round1,
)
from genprint.feature_store import (
    ATTRIBUTION_CLASSES,
    Authenticity,
    FeatureSet,
    Generator,
    PrototypeRecord,
    split_train_val,
)
from genprint.metrics import DistanceMetric
from genprint.neural import TrainConfig

from builders import split_class_sets


def _detection_splits(sets, fraction=0.8, seed=1):
    pairs = synthetic.detection_pairs(sets)
    train, val = {}, {}
    for name, fset in pairs.items():
        pair = split_train_val(fset, fraction, seed=seed)
        train[name], val[name] = pair.train, pair.validation
    return train, val


def _exact_classifier(val_sets, label_fn):
    """Oracle that looks predictions up by feature bytes: always exact."""
    lookup = {}
    for fset in val_sets.values() if isinstance(val_sets, dict) else val_sets:
        labels = label_fn(fset)
        for row, lab in zip(fset.matrix(), labels):
            lookup[row.tobytes()] = int(lab)
    return lambda m: np.array([lookup[row.tobytes()] for row in m])


# ---------------------------------------------------------------------------
# Scalar helpers
# ---------------------------------------------------------------------------


def test_round1_half_away_from_zero():
    assert round1(98.85) == "98.9"
    assert round1(0.05) == "0.1"
    assert round1(0.25) == "0.3"
    assert round1(-0.25) == "-0.3"
    assert round1(100.0) == "100.0"
    assert round1(50.0) == "50.0"


def test_ordered_generator_names():
    assert ordered_generator_names(["BigGAN", "Midjourney"]) == ("Midjourney", "BigGAN")
    full = ordered_generator_names(g.value for g in Generator)
    assert full == tuple(g.value for g in Generator)
    with pytest.raises(ValueError, match="unknown generator"):
        ordered_generator_names(["Midjourney", "DALLE"])


def test_feasible_cell():
    assert feasible_cell(4, 1, 2)
    assert not feasible_cell(4, 3, 2)  # 4 // 2 = 2 < 3
    assert feasible_cell(2000, 101, 2)
    assert feasible_cell(18, 2, 9)
    assert not feasible_cell(18, 3, 9)  # 18 // 9 = 2 < 3
    assert feasible_cell(9000, 101, 9)


# ---------------------------------------------------------------------------
# EvalMatrix
# ---------------------------------------------------------------------------


def test_eval_matrix_means_exact():
    cells = np.array([[100.0, 50.0], [0.0, 70.0]])
    m = EvalMatrix(("a", "b"), ("x", "y"), cells)
    assert np.array_equal(m.row_means(), np.array([75.0, 35.0]))
    assert np.array_equal(m.col_means(), np.array([50.0, 60.0]))
    assert m.grand_mean() == 55.0


def test_eval_matrix_validation():
    with pytest.raises(ValueError, match="shape"):
        EvalMatrix(("a",), ("x", "y"), np.zeros((2, 2)))
    with pytest.raises(ValueError, match=r"\[0, 100\]"):
        EvalMatrix(("a",), ("x",), np.array([[101.0]]))
    with pytest.raises(ValueError, match=r"\[0, 100\]"):
        EvalMatrix(("a",), ("x",), np.array([[-0.5]]))


def test_cross_generator_eval_perfect_and_coin_flip(world16):
    _, sets = world16
    _, val_sets = _detection_splits(sets)

    perfect = _exact_classifier(val_sets, lambda f: f.authenticity_labels())
    names, row = cross_generator_eval(perfect, val_sets)
    assert names == tuple(g.value for g in Generator)
    assert np.array_equal(row, np.full(8, 100.0))

    rng = np.random.default_rng(123)
    coin = lambda m: rng.integers(0, 2, size=len(m))
    rows = [cross_generator_eval(coin, val_sets)[1] for _ in range(8)]
    grand = float(np.mean(rows))
    assert abs(grand - 50.0) <= 1.6


def test_knn_detection_matrix(world16):
    _, sets = world16
    train_sets, val_sets = _detection_splits(sets)
    m = knn_detection_matrix(train_sets, val_sets, support_size=16, k=3,
                             metric=DistanceMetric.EUCLIDEAN, seed=0)
    assert m.row_labels == m.col_labels == tuple(g.value for g in Generator)
    assert np.array_equal(np.diag(m.cells), np.full(8, 100.0))  # in-domain is easy
    assert m.grand_mean() >= 90.0

    with pytest.raises(ValueError, match="same generators"):
        bad = dict(val_sets)
        del bad["ADM"]
        knn_detection_matrix(train_sets, bad, 16, 3, DistanceMetric.EUCLIDEAN, 0)


def test_mlp_detection_matrix(world16):
    _, sets = world16
    train_sets, val_sets = _detection_splits(sets)
    cfg = TrainConfig(learning_rate=0.1, batch_size=16, patience=15, max_epochs=150, seed=0)
    m = mlp_detection_matrix(train_sets, val_sets, hidden=(), config=cfg)
    assert m.row_labels == tuple(g.value for g in Generator)
    assert float(np.mean(np.diag(m.cells))) >= 95.0  # in-domain is easy
    assert m.grand_mean() >= 85.0
    again = mlp_detection_matrix(train_sets, val_sets, hidden=(), config=cfg)
    assert again == m  # derived seeds make the whole matrix reproducible


# ---------------------------------------------------------------------------
# Grid searches
# ---------------------------------------------------------------------------


def test_grid_detection_feasibility_and_best(world16):
    _, sets = world16
    train_sets, val_sets = _detection_splits(sets)
    metrics = (DistanceMetric.EUCLIDEAN, DistanceMetric.CORRELATION)
    grid = grid_search_knn_detection(train_sets, val_sets, metrics, sizes=(4, 16), ks=(1, 3, 9), seed=0)
    assert grid.sizes == (4, 16) and grid.ks == (1, 3, 9)
    assert len(grid.cells) == 2 * 2 * 3
    by_key = {(c.metric, c.support_size, c.k): c for c in grid.cells}
    # size 4 holds 2 per class: only k=1 is feasible; size 16 holds 8: k <= 8
    for metric in ("euclidean", "correlation"):
        assert by_key[(metric, 4, 1)].feasible
        assert not by_key[(metric, 4, 3)].feasible
        assert not by_key[(metric, 4, 9)].feasible
        assert all(by_key[(metric, 16, k)].feasible for k in (1, 3))
        assert not by_key[(metric, 16, 9)].feasible
    feas = [c for c in grid.cells if c.feasible]
    assert all(0.0 <= c.accuracy <= 100.0 for c in feas)
    best = grid.best()
    assert best.accuracy == max(c.accuracy for c in feas)
    assert best is next(c for c in feas if c.accuracy == best.accuracy)


def test_grid_detection_jobs_equivalence(world16):
    _, sets = world16
    train_sets, val_sets = _detection_splits(sets)
    kw = dict(metrics=(DistanceMetric.EUCLIDEAN,), sizes=(8, 16), ks=(1, 3), seed=5)
    serial = grid_search_knn_detection(train_sets, val_sets, **kw, jobs=1)
    threaded = grid_search_knn_detection(train_sets, val_sets, **kw, jobs=4)
    assert serial == threaded


def test_grid_single_cell(world16):
    _, sets = world16
    train_sets, val_sets = _detection_splits(sets)
    grid = grid_search_knn_detection(train_sets, val_sets, (DistanceMetric.EUCLIDEAN,), (16,), (1,), seed=0)
    assert len(grid.cells) == 1
    assert grid.best() == grid.cells[0]


def test_grid_all_infeasible(world16):
    _, sets = world16
    train_sets, val_sets = _detection_splits(sets)
    grid = grid_search_knn_detection(train_sets, val_sets, (DistanceMetric.EUCLIDEAN,), (4,), (9,), seed=0)
    assert [c.feasible for c in grid.cells] == [False]
    with pytest.raises(ValueError, match="no feasible cells"):
        grid.best()


def test_grid_attribution(world16):
    _, sets = world16
    train, val = split_class_sets(sets)
    class_train = [train[c] for c in ATTRIBUTION_CLASSES]
    class_val = [val[c] for c in ATTRIBUTION_CLASSES]
    grid = grid_search_knn_attribution(class_train, class_val, sizes=(18, 45), ks=(1, 3, 5),
                                       metric=DistanceMetric.EUCLIDEAN, seed=0)
    by_key = {(c.support_size, c.k): c for c in grid.cells}
    assert by_key[(18, 1)].feasible and not by_key[(18, 3)].feasible
    assert all(by_key[(45, k)].feasible for k in (1, 3, 5))
    assert grid.best().accuracy >= 95.0
    serial = grid_search_knn_attribution(class_train, class_val, sizes=(18, 45), ks=(1, 3, 5),
                                         metric=DistanceMetric.EUCLIDEAN, seed=0, jobs=3)
    assert serial == grid

    with pytest.raises(ValueError, match="9 train and validation"):
        grid_search_knn_attribution(class_train[:5], class_val, sizes=(18,), ks=(1,))


def _planted_sets(n_train=200, n_val=80, dim=64, shift=1.5, seed=42):
    """Two-class world where the difference is a constant coordinate shift.

    Centering removes a constant shift, so correlation distance is blind to
    it while Manhattan separates the classes cleanly.
    """
    rng = np.random.default_rng(seed)

    def build(n, start):
        recs = []
        for i in range(n):
            recs.append(PrototypeRecord(
                rng.standard_normal(dim), Authenticity.REAL, None, f"r-{start + i:05d}"))
        for i in range(n):
            recs.append(PrototypeRecord(
                rng.standard_normal(dim) + shift, Authenticity.FAKE, Generator.ADM, f"f-{start + i:05d}"))
        return FeatureSet(dim, "synthetic", recs)

    return {"ADM": build(n_train, 0)}, {"ADM": build(n_val, n_train)}


def test_grid_selects_planted_metric():
    train_sets, val_sets = _planted_sets()
    grid = grid_search_knn_detection(
        train_sets, val_sets,
        metrics=(DistanceMetric.CORRELATION, DistanceMetric.MANHATTAN),
        sizes=(100,), ks=(9,), seed=0,
    )
    by_metric = {c.metric: c for c in grid.cells}
    assert grid.best().metric == "manhattan"
    assert by_metric["manhattan"].accuracy >= 85.0
    assert by_metric["correlation"].accuracy <= 65.0  # blind to the shift


# ---------------------------------------------------------------------------
# Confusion
# ---------------------------------------------------------------------------


def test_confusion_counts_and_accuracy(world16):
    _, sets = world16
    class_sets = [sets[c] for c in ATTRIBUTION_CLASSES]
    perfect = _exact_classifier(class_sets, lambda f: f.attribution_labels())
    cm = confusion(perfect, class_sets)
    assert cm.class_names == ATTRIBUTION_CLASSES
    sizes = np.array([len(s.records) for s in class_sets])
    assert np.array_equal(np.diag(cm.counts), sizes)
    assert cm.counts.sum() == sizes.sum()
    assert cm.overall_accuracy() == 1.0
    assert np.allclose(cm.per_class_recall(), 1.0)

    constant = lambda m: np.zeros(len(m), dtype=int)
    cm0 = confusion(constant, class_sets)
    assert np.array_equal(cm0.counts[:, 0], sizes)
    assert cm0.overall_accuracy() == pytest.approx(sizes[0] / sizes.sum())

    with pytest.raises(ValueError, match="9 class sets"):
        confusion(constant, class_sets[:3])


def test_confusion_validation_and_empty_rows():
    counts = np.zeros((9, 9), dtype=np.int64)
    counts[0, 0] = 5
    cm = ConfusionMatrix(counts, ATTRIBUTION_CLASSES)
    rec = cm.per_class_recall()
    assert rec[0] == 1.0 and np.all(np.isnan(rec[1:]))
    assert cm.overall_accuracy() == 1.0

    with pytest.raises(ValueError, match="square"):
        ConfusionMatrix(np.zeros((2, 3), int), ("a", "b"))
    with pytest.raises(ValueError, match="negative"):
        ConfusionMatrix(np.array([[-1]]), ("a",))
    with pytest.raises(ValueError, match="empty confusion"):
        ConfusionMatrix(np.zeros((2, 2), int), ("a", "b")).overall_accuracy()


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _sample_matrix():
    return EvalMatrix(("Midjourney", "ADM"), ("Midjourney", "ADM"),
                      np.array([[98.85, 50.05], [62.5, 100.0]]))


def _sample_grid():
    cells = [
        GridCell("euclidean", 4, 1, 88.25, True),
        GridCell("euclidean", 4, 3, None, False),
        GridCell("euclidean", 16, 1, 90.0, True),
        GridCell("euclidean", 16, 3, 90.0, True),
    ]
    return GridResult(("euclidean",), (4, 16), (1, 3), cells)


def _sample_confusion():
    counts = np.zeros((9, 9), dtype=np.int64)
    for i in range(9):
        counts[i, i] = 10
    counts[3, 4] = 2
    return ConfusionMatrix(counts, ATTRIBUTION_CLASSES)


def test_matrix_csv_round_trip():
    m = _sample_matrix()
    text = emit_report(m, "csv")
    assert text.splitlines()[0] == "source,target,accuracy"
    back = parse_matrix_csv(text)
    assert back == m
    assert emit_report(back, "csv") == text


def test_matrix_csv_preserves_row_order():
    text = "source,target,accuracy\nB,x,1.0\nA,x,2.0\n"
    m = parse_matrix_csv(text)
    assert m.row_labels == ("B", "A")
    with pytest.raises(ValueError, match="bad header"):
        parse_matrix_csv("a,b,c\n")


def test_matrix_markdown_shape():
    md = emit_report(_sample_matrix(), "md")
    lines = md.splitlines()
    assert lines[0].startswith("| source \\ target |")
    assert lines[0].endswith("| Avg. |")
    assert lines[-1].startswith("| Avg. |")
    assert "98.9" in md and "50.1" in md  # one-decimal, ties away from zero
    grand = round1(_sample_matrix().grand_mean())
    assert md.rstrip().endswith(f"{grand} |")


def test_grid_csv_round_trip():
    g = _sample_grid()
    text = emit_report(g, "csv")
    assert text.splitlines()[0] == "metric,support,k,accuracy,feasible"
    assert ",3,,false" in text  # infeasible cell carries an empty accuracy
    back = parse_grid_csv(text)
    assert back == g
    assert back.best() == g.best()
    with pytest.raises(ValueError, match="bad header"):
        parse_grid_csv("x\n")


def test_grid_markdown_shape():
    md = emit_report(_sample_grid(), "md")
    assert "### euclidean" in md
    assert "|S| \\ k" in md
    assert "—" in md  # infeasible dash
    # ties break toward the first cell in sweep order
    assert md.rstrip().endswith("Best: metric=euclidean, |S|=16, k=1, accuracy=90.0")


def test_empty_grid_header_only_csv():
    g = GridResult((), (), (), [])
    assert emit_report(g, "csv") == "metric,support,k,accuracy,feasible\n"


def test_confusion_csv_round_trip():
    cm = _sample_confusion()
    text = emit_report(cm, "csv")
    assert text.splitlines()[0] == "true,predicted,count"
    back = parse_confusion_csv(text)
    assert back == cm
    with pytest.raises(ValueError, match="bad header"):
        parse_confusion_csv("true,predicted\n")


def test_confusion_markdown_shape():
    md = emit_report(_sample_confusion(), "md")
    assert md.splitlines()[0].startswith("| true \\ predicted |")
    assert "| Real | 10 |" in md
    assert md.rstrip().endswith("Overall accuracy: 97.8%")


def test_emit_report_errors():
    with pytest.raises(ValueError, match="unknown format"):
        emit_report(_sample_matrix(), "html")
    with pytest.raises(TypeError, match="cannot report a"):
        emit_report({"not": "supported"})


def test_grid_cell_consistency():
    with pytest.raises(ValueError, match="feasible flag"):
        GridCell("euclidean", 4, 1, None, True)
    with pytest.raises(ValueError, match="feasible flag"):
        GridCell("euclidean", 4, 1, 50.0, False)
