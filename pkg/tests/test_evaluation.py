"""Metrics, folds and the evaluation harnesses."""

import numpy as np
import pytest

from persemo.errors import ConfigError, StratificationImpossible
from persemo.evaluation import (
    CvPlan,
    binary_auc,
    confusion_matrix,
    f1_macro,
    fingerprint,
    holdout_eval,
    nested_cv,
    plain_folds,
    precision_recall_f1,
    roc_auc_ovr,
    roc_points,
    roc_table,
    stratified_folds,
)


def blobs(rng, n_per_class=30, centers=((-3.0, 0.0), (3.0, 0.0)), noise=0.5):
    X, y = [], []
    for label, center in zip("ab", centers):
        X.append(np.array(center) + noise * rng.standard_normal((n_per_class, 2)))
        y += [label] * n_per_class
    return np.concatenate(X), np.array(y, dtype=object)


# ---------------------------------------------------------------- metrics


def test_confusion_matrix_layout():
    cm = confusion_matrix(
        ["a", "a", "b", "b", "b"], ["a", "b", "b", "b", "a"], ["a", "b"]
    )
    # rows are true classes, columns predicted
    assert cm.tolist() == [[1, 1], [1, 2]]


def test_precision_recall_f1_zero_division():
    # class b never predicted, class c never true
    cm = np.array([[2, 0, 1], [1, 0, 0], [0, 0, 0]])
    precision, recall, f1 = precision_recall_f1(cm)
    assert precision[1] == 0.0 and recall[2] == 0.0
    assert f1[1] == 0.0 and f1[2] == 0.0


def test_f1_macro_frozen_value():
    assert f1_macro(np.array([[8, 2], [3, 7]])) == pytest.approx(
        0.7493734335839599, abs=1e-12
    )


def test_binary_auc_fixture():
    pos = np.array([False, False, True, True])
    assert binary_auc(pos, np.array([0.1, 0.4, 0.35, 0.8])) == 0.75
    assert binary_auc(pos, np.full(4, 0.7)) == 0.5
    assert binary_auc(np.array([True, True]), np.array([0.1, 0.2])) is None
    assert binary_auc(np.array([False, False]), np.array([0.1, 0.2])) is None


def auc_pair_oracle(pos, scores):
    wins = ties = 0
    p_scores = scores[pos]
    n_scores = scores[~pos]
    for sp in p_scores:
        for sn in n_scores:
            wins += sp > sn
            ties += sp == sn
    return (wins + 0.5 * ties) / (len(p_scores) * len(n_scores))


def test_binary_auc_matches_pair_counting():
    rng = np.random.default_rng(71)
    for _ in range(30):
        n = int(rng.integers(4, 60))
        pos = rng.uniform(size=n) < 0.5
        if pos.all() or not pos.any():
            continue
        scores = np.round(rng.uniform(size=n), 1)  # coarse grid forces ties
        assert binary_auc(pos, scores) == pytest.approx(auc_pair_oracle(pos, scores))


def test_binary_auc_monotone_invariant():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pos = rng.uniform(size=30) < 0.4
        if pos.all() or not pos.any():
            continue
        scores = rng.uniform(0.01, 1.0, size=30)
        assert binary_auc(pos, scores) == pytest.approx(binary_auc(pos, scores**3))


def test_roc_points_shape():
    pos = np.array([True, True, False, False])
    scores = np.array([0.9, 0.8, 0.3, 0.1])
    pts = roc_points(pos, scores)
    thresholds = [t for t, _, _ in pts]
    assert thresholds == sorted(thresholds, reverse=True)
    fprs = [f for _, f, _ in pts]
    tprs = [t for _, _, t in pts]
    assert fprs == sorted(fprs) and tprs == sorted(tprs)
    assert pts[-1][1:] == (1.0, 1.0)
    assert (0.0, 1.0) in [(f, t) for _, f, t in pts]  # perfect separation
    assert roc_points(np.array([True, True]), np.array([0.1, 0.2])) == []


def test_roc_auc_ovr_warnings_and_macro():
    y = np.array(["a", "a", "b"], dtype=object)
    scores = np.array([[0.9, 0.1, 0.0], [0.8, 0.2, 0.0], [0.3, 0.7, 0.0]])
    per_class, macro, warnings = roc_auc_ovr(y, scores, ["a", "b", "c"])
    assert per_class["a"] == 1.0 and per_class["b"] == 1.0
    assert per_class["c"] is None
    assert macro == 1.0
    assert any("'c'" in w for w in warnings)


# ---------------------------------------------------------------- folds


def test_stratified_folds_partition_and_balance():
    rng = np.random.default_rng(2)
    y = np.array(["a"] * 50 + ["b"] * 50, dtype=object)[rng.permutation(100)]
    folds = stratified_folds(y, 10, seed=4)
    assert len(folds) == 10
    flat = np.concatenate(folds)
    assert sorted(flat) == list(range(100))
    for fold in folds:
        assert len(fold) == 10
        assert (y[fold] == "a").sum() == 5  # 50/50 input stays 5+5 per fold


def test_stratified_folds_class_counts_within_one():
    y = np.array(["a"] * 13 + ["b"] * 7, dtype=object)
    folds = stratified_folds(y, 3, seed=0)
    for c, total in (("a", 13), ("b", 7)):
        counts = [(y[f] == c).sum() for f in folds]
        assert max(counts) - min(counts) <= 1
        assert sum(counts) == total


def test_stratified_folds_errors_and_determinism():
    y = np.array(["a"] * 10 + ["b"] * 2, dtype=object)
    with pytest.raises(StratificationImpossible):
        stratified_folds(y, 3, seed=0)
    with pytest.raises(ConfigError):
        stratified_folds(np.array(["a", "b"], dtype=object), 1, seed=0)
    big = np.array(["a", "b"] * 20, dtype=object)
    a = stratified_folds(big, 4, seed=9)
    b = stratified_folds(big, 4, seed=9)
    assert all(np.array_equal(x, z) for x, z in zip(a, b))


def test_plain_folds_partition():
    folds = plain_folds(23, 5, seed=1)
    flat = np.concatenate(folds)
    assert sorted(flat) == list(range(23))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    with pytest.raises(StratificationImpossible):
        plain_folds(3, 5, seed=0)


# ---------------------------------------------------------------- fingerprint


def test_fingerprint_order_sensitive():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    y = ["a", "b"]
    assert fingerprint(X, y) == fingerprint(X.copy(), list(y))
    assert fingerprint(X[::-1], y[::-1]) != fingerprint(X, y)
    assert fingerprint(X, ["a", "c"]) != fingerprint(X, y)


# ---------------------------------------------------------------- holdout


def test_holdout_eval_separable():
    rng = np.random.default_rng(11)
    X_train, y_train = blobs(rng, 30)
    X_test, y_test = blobs(rng, 10)
    report, (scaler, model) = holdout_eval(
        X_train, y_train, X_test, y_test, "knn", {"k": [3]}, seed=0
    )
    assert report.f1_macro > 0.95
    assert report.auc_macro is not None and report.auc_macro > 0.95
    assert report.chosen_config == {"k": 3}
    assert report.test_fingerprint == fingerprint(X_test, y_test)
    assert report.n_train == 60 and report.n_test == 20
    # the returned pipeline reproduces the report's predictions
    pred = model.predict(scaler.transform(X_test))
    cm = confusion_matrix(y_test, pred, list(report.classes))
    assert np.array_equal(cm, report.confusion)


def test_holdout_eval_standardizer_ignores_test_side():
    rng = np.random.default_rng(13)
    X_train, y_train = blobs(rng, 20)
    X_test, y_test = blobs(rng, 8)
    _, (scaler_a, _) = holdout_eval(
        X_train, y_train, X_test, y_test, "knn", {"k": [1]}, seed=5
    )
    _, (scaler_b, _) = holdout_eval(
        X_train, y_train, X_test + 100.0, y_test, "knn", {"k": [1]}, seed=5
    )
    assert np.array_equal(scaler_a.mean_, scaler_b.mean_)
    assert np.array_equal(scaler_a.scale_, scaler_b.scale_)


def test_holdout_eval_unseen_test_class():
    rng = np.random.default_rng(17)
    X_train, y_train = blobs(rng, 20)
    X_test = np.array([[-3.0, 0.0], [3.0, 0.0], [0.0, 9.0]])
    y_test = np.array(["a", "b", "c"], dtype=object)
    report, _ = holdout_eval(X_train, y_train, X_test, y_test, "knn", {"k": [1]})
    assert report.classes == ("a", "b", "c")
    assert report.confusion.shape == (3, 3)
    assert report.confusion[2, 2] == 0  # c can never be predicted
    assert report.per_class["c"]["recall"] == 0.0


def test_holdout_eval_single_config_skips_inner_cv():
    # 3 frames per class cannot stratify into 5 inner folds; a singleton grid
    # must not attempt to
    X_train = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]])
    y_train = np.array(["a", "a", "a", "b", "b", "b"], dtype=object)
    report, _ = holdout_eval(
        X_train, y_train, X_train, y_train, "knn", {"k": [1]}, inner_folds=5
    )
    assert report.f1_macro == 1.0


def test_holdout_eval_grid_tie_keeps_grid_order():
    rng = np.random.default_rng(23)
    X_train, y_train = blobs(rng, 30, noise=0.1)
    X_test, y_test = blobs(rng, 5, noise=0.1)
    # both k values are perfect on this data; the first grid entry wins
    report, _ = holdout_eval(
        X_train, y_train, X_test, y_test, "knn", {"k": [3, 1]}, seed=2
    )
    assert report.chosen_config == {"k": 3}


def test_holdout_eval_deterministic():
    rng = np.random.default_rng(29)
    X_train, y_train = blobs(rng, 25, noise=2.5)
    X_test, y_test = blobs(rng, 10, noise=2.5)
    grid = {"n_trees": [3], "max_depth": [3]}
    a, _ = holdout_eval(X_train, y_train, X_test, y_test, "random_forest", grid, seed=7)
    b, _ = holdout_eval(X_train, y_train, X_test, y_test, "random_forest", grid, seed=7)
    assert a.to_json() == b.to_json()


# ---------------------------------------------------------------- nested CV


def test_nested_cv_structure():
    rng = np.random.default_rng(31)
    X, y = blobs(rng, 25)
    plan = CvPlan(outer_folds=5, inner_folds=2)
    report = nested_cv(X, y, "knn", {"k": [1, 3]}, plan, seed=3)
    assert len(report.folds) == 5
    fold_f1s = [f.f1 for f in report.folds]
    assert report.f1_macro == pytest.approx(np.mean(fold_f1s))
    assert report.f1_macro_fold_std == pytest.approx(np.std(fold_f1s))
    assert report.f1_macro_pooled is not None
    flat = np.concatenate([f.test_indices for f in report.folds])
    assert sorted(flat) == list(range(len(y)))  # outer folds partition the data


def test_nested_cv_leakage_probe():
    # perturbing one outer-test sample must not change that fold's scaler or
    # chosen configuration (they depend on the outer-train only)
    rng = np.random.default_rng(37)
    X, y = blobs(rng, 15, noise=2.0)
    plan = CvPlan(outer_folds=3, inner_folds=2)
    base = nested_cv(X, y, "knn", {"k": [1, 3]}, plan, seed=11)
    victim = base.folds[0].test_indices[0]
    X2 = X.copy()
    X2[victim] += 50.0
    bumped = nested_cv(X2, y, "knn", {"k": [1, 3]}, plan, seed=11)
    assert bumped.folds[0].config == base.folds[0].config
    assert bumped.folds[0].scaler_mean == base.folds[0].scaler_mean
    assert bumped.folds[0].scaler_scale == base.folds[0].scaler_scale
    assert bumped.folds[0].test_indices == base.folds[0].test_indices


def test_roc_table_flattens_report():
    rng = np.random.default_rng(41)
    X_train, y_train = blobs(rng, 20)
    X_test, y_test = blobs(rng, 8)
    report, _ = holdout_eval(X_train, y_train, X_test, y_test, "knn", {"k": [3]})
    rows = roc_table(report)
    assert {r[0] for r in rows} == {"a", "b"}
    for c in ("a", "b"):
        assert len([r for r in rows if r[0] == c]) == len(report.per_class[c]["roc"])
