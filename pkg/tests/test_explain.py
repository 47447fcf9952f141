"""Attribution estimator: linear exactness, quadrature oracle, rankings."""

import json

import numpy as np
import pytest

from genprint.explain import (
    TopKReport,
    beeswarm_csv,
    completeness_gap,
    expected_gradients,
    expected_gradients_batch,
    report_json,
    sign_agreement,
    top_k_per_class,
)
from genprint.neural import (
    OUTPUT_SOFTMAX,
    MlpArchitecture,
    init_model,
    logit_input_gradients,
    logits,
)


def _linear_model(dim=6, classes=3, seed=0):
    return init_model(MlpArchitecture(dim, (), classes, OUTPUT_SOFTMAX), seed, dtype=np.float64)


def _mlp_model(dim=4, hidden=(16,), classes=9, seed=1):
    return init_model(MlpArchitecture(dim, hidden, classes, OUTPUT_SOFTMAX), seed, dtype=np.float64)


def quadrature_attribution(model, x, class_index, b, steps=10_000):
    """Midpoint-rule oracle for the single-background path integral."""
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    alphas = (np.arange(steps) + 0.5) / steps
    diffs = x - b
    points = b[None, :] + alphas[:, None] * diffs[None, :]
    grads = logit_input_gradients(model, points, class_index)
    return diffs * grads.mean(axis=0)


# ---------------------------------------------------------------------------
# Linear exactness and basic contracts
# ---------------------------------------------------------------------------


def test_linear_model_exact_any_seed_any_budget():
    rng = np.random.default_rng(0)
    model = _linear_model()
    x = rng.standard_normal(6)
    for n_bg in (1, 5, 20):
        bg = rng.standard_normal((n_bg, 6))
        for c in range(3):
            want = model.weights[0][:, c] * (x - bg.mean(axis=0))
            for seed in (0, 1, 99, (7, 3)):
                for n_samples in (1, 7, 50):
                    got = expected_gradients(model, x, c, bg, n_samples=n_samples, seed=seed)
                    assert np.allclose(got, want, atol=1e-9, rtol=0)


def test_sample_in_singleton_background_is_zero():
    model = _mlp_model()
    x = np.random.default_rng(1).standard_normal(4)
    got = expected_gradients(model, x, 0, x[None, :], n_samples=64)
    assert np.array_equal(got, np.zeros(4))


def test_input_validation():
    model = _mlp_model()
    x = np.zeros(4)
    bg = np.zeros((3, 4))
    with pytest.raises(ValueError, match="single vector"):
        expected_gradients(model, np.zeros((2, 4)), 0, bg)
    with pytest.raises(ValueError, match="empty background"):
        expected_gradients(model, x, 0, np.zeros((0, 4)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        expected_gradients(model, x, 0, np.zeros((3, 5)))
    with pytest.raises(ValueError, match="n_samples"):
        expected_gradients(model, x, 0, bg, n_samples=0)


def test_small_budget_still_covers_every_background():
    # budget below the background count: each background must still matter,
    # so for a linear model the full-background mean is reproduced exactly
    rng = np.random.default_rng(2)
    model = _linear_model()
    x = rng.standard_normal(6)
    bg = rng.standard_normal((10, 6))
    got = expected_gradients(model, x, 1, bg, n_samples=3, seed=5)
    want = model.weights[0][:, 1] * (x - bg.mean(axis=0))
    assert np.allclose(got, want, atol=1e-9)


def test_batch_matches_per_row_seeding():
    rng = np.random.default_rng(3)
    model = _mlp_model()
    xs = rng.standard_normal((4, 4))
    bg = rng.standard_normal((6, 4))
    batch = expected_gradients_batch(model, xs, 2, bg, n_samples=40, seed=9)
    for i in range(4):
        single = expected_gradients(model, xs[i], 2, bg, n_samples=40, seed=[9, i])
        assert np.array_equal(batch[i], single)


# ---------------------------------------------------------------------------
# Oracle agreement and completeness
# ---------------------------------------------------------------------------


def test_matches_quadrature_oracle():
    rng = np.random.default_rng(4)
    model = _mlp_model(dim=4, hidden=(16,), classes=3, seed=4)
    x = rng.standard_normal(4) * 2.0
    b = rng.standard_normal(4)
    oracle = quadrature_attribution(model, x, 1, b)
    # the oracle itself must satisfy the path-integral identity; relu kinks
    # make the midpoint rule first-order, hence the 1e-4 tolerance
    delta = float(logits(model, x[None])[0, 1] - logits(model, b[None])[0, 1])
    assert oracle.sum() == pytest.approx(delta, abs=1e-4)

    est = expected_gradients(model, x, 1, b[None, :], n_samples=2000, seed=0)
    assert np.allclose(est, oracle, atol=2e-4)


def test_error_decreases_with_budget():
    rng = np.random.default_rng(5)
    model = _mlp_model(dim=16, hidden=(16,), classes=3, seed=6)
    xs = rng.standard_normal((5, 16))
    b = rng.standard_normal(16)
    medians = []
    for n in (10, 100, 1000):
        errs = []
        for i, x in enumerate(xs):
            oracle = quadrature_attribution(model, x, 0, b)
            est = expected_gradients(model, x, 0, b[None, :], n_samples=n, seed=[8, i])
            errs.append(np.abs(est - oracle))
        medians.append(float(np.median(np.concatenate(errs))))
    assert medians[0] > medians[1] > medians[2]


def test_completeness_small_mlp():
    rng = np.random.default_rng(7)
    model = _mlp_model(dim=4, hidden=(16,), classes=9, seed=8)
    bg = rng.standard_normal((100, 4))
    x = rng.standard_normal(4) * 1.5
    for c in (0, 4, 8):
        attr = expected_gradients(model, x, c, bg, n_samples=1000, seed=c)
        gap, delta = completeness_gap(model, x, c, bg, attr)
        assert gap == pytest.approx(float(attr.sum()) - delta, abs=1e-12)
        assert abs(gap) < 0.02 * max(abs(delta), 0.1)


def test_completeness_exact_for_linear():
    rng = np.random.default_rng(8)
    model = _linear_model(seed=9)
    bg = rng.standard_normal((7, 6))
    x = rng.standard_normal(6)
    attr = expected_gradients(model, x, 2, bg, n_samples=11, seed=3)
    gap, delta = completeness_gap(model, x, 2, bg, attr)
    assert abs(gap) < 1e-9
    assert delta != 0.0


# ---------------------------------------------------------------------------
# Rankings, overlap, signs
# ---------------------------------------------------------------------------


def test_top_k_ranking_and_ties():
    # class 0: feature 3 strongest, then 1; class 1: tie between 2 and 5
    a0 = np.array([[0.0, 2.0, 0.0, 5.0, 0.0, 0.0], [0.0, -2.0, 0.0, -5.0, 0.0, 0.0]])
    a1 = np.array([[0.0, 0.0, 3.0, 0.0, 0.0, -3.0]])
    rep = top_k_per_class([a0, a1], ("c0", "c1"), k=2)
    assert rep.indices[0].tolist() == [3, 1]
    assert rep.indices[1].tolist() == [2, 5]  # tie -> lower index first
    assert rep.scores[0].tolist() == [5.0, 2.0]
    assert rep.k == 2


def test_top_k_overlap_percentages():
    base = np.zeros((1, 8))
    a = base.copy(); a[0, [0, 1]] = [2.0, 1.0]
    b = base.copy(); b[0, [0, 1]] = [1.0, 2.0]
    c = base.copy(); c[0, [6, 7]] = [1.0, 2.0]
    d = base.copy(); d[0, [1, 5]] = [3.0, 1.0]
    rep = top_k_per_class([a, b, c, d], ("A", "B", "C", "D"), k=2)
    assert np.array_equal(np.diag(rep.overlap), np.full(4, 100.0))
    assert rep.overlap[0, 1] == 100.0  # same set, different order
    assert rep.overlap[0, 2] == 0.0
    assert rep.overlap[0, 3] == 50.0
    assert np.array_equal(rep.overlap, rep.overlap.T)


def test_top_k_errors():
    with pytest.raises(ValueError, match="one attribution matrix per class"):
        top_k_per_class([np.zeros((1, 4))], ("a", "b"), k=2)
    with pytest.raises(ValueError, match="need 10"):
        top_k_per_class([np.zeros((1, 4))], ("a",), k=10)


def test_report_validation():
    good = top_k_per_class([np.eye(4), np.eye(4)], ("a", "b"), k=2)
    with pytest.raises(ValueError, match="duplicate feature"):
        TopKReport(("a",), np.array([[1, 1]]), np.ones((1, 2)), np.array([[100.0]]))
    with pytest.raises(ValueError, match="diagonal"):
        TopKReport(good.class_names, good.indices, good.scores, np.zeros((2, 2)))
    bad = good.overlap.copy()
    bad[0, 1] = 40.0
    with pytest.raises(ValueError, match="symmetric"):
        TopKReport(good.class_names, good.indices, good.scores, bad)
    with pytest.raises(ValueError, match="shape mismatch"):
        TopKReport(("a",), good.indices, good.scores, good.overlap)


def test_sign_agreement_extremes_and_chance():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((1000, 6)) + 0.01  # keep away from exact zeros
    assert np.array_equal(sign_agreement([0, 3], a, a), np.ones(2))
    assert np.array_equal(sign_agreement([0, 3], a, -a), np.zeros(2))
    b = rng.standard_normal((1000, 6))
    agree = sign_agreement([0, 1, 2], a, b)
    assert np.all(np.abs(agree - 0.5) < 0.05)
    with pytest.raises(ValueError, match="align"):
        sign_agreement([0], a, b[:10])


def test_report_json_round_trip():
    rep = top_k_per_class([np.eye(5), np.eye(5) * 2], ("Real", "ADM"), k=3)
    text = report_json(rep, sign_table={"Real|ADM": {"0": 0.75}})
    assert text.endswith("\n")
    data = json.loads(text)
    assert data["classes"] == ["Real", "ADM"]
    assert len(data["top_features"]["Real"]) == 3
    assert data["overlap_percent"]["Real"]["Real"] == 100.0
    assert data["sign_agreement"]["Real|ADM"]["0"] == 0.75
    assert text == report_json(rep, sign_table={"Real|ADM": {"0": 0.75}})  # stable

    no_signs = json.loads(report_json(rep))
    assert "sign_agreement" not in no_signs


def test_beeswarm_csv():
    rng = np.random.default_rng(10)
    xs = rng.standard_normal((4, 5))
    at = rng.standard_normal((4, 5))
    text = beeswarm_csv(xs, at, [2, 0])
    lines = text.splitlines()
    assert lines[0] == "feature,value,attribution"
    assert len(lines) == 1 + 2 * 4
    f, v, a = lines[1].split(",")
    assert f == "2" and float(v) == xs[0, 2] and float(a) == at[0, 2]
    with pytest.raises(ValueError, match="align"):
        beeswarm_csv(xs, at[:2], [0])
