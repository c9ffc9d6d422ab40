"""Random forest: split search against an exhaustive oracle, importances,
determinism and structural limits."""

import numpy as np
import pytest

from persemo.classifiers.forest import ForestClassifier
from persemo.errors import ConfigError, DegenerateTraining, NoSplits


def oracle_best_split(X, y, min_leaf=1):
    """Exhaustive (feature, threshold) search minimizing weighted Gini.

    Ties resolve to the lowest feature index, then the lowest threshold,
    matching the documented tree rule.  Returns (gini, feature, threshold).
    """
    classes = sorted(set(y))
    n = len(y)

    def gini(part):
        p = np.array([part.count(c) for c in classes], float) / len(part)
        return 1.0 - float((p * p).sum())

    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        vs = X[order, f]
        ys = [y[i] for i in order]
        for cut in range(min_leaf, n - min_leaf + 1):
            if not vs[cut] > vs[cut - 1]:
                continue
            w = (cut * gini(ys[:cut]) + (n - cut) * gini(ys[cut:])) / n
            thr = (vs[cut - 1] + vs[cut]) / 2.0
            if thr >= vs[cut]:
                thr = vs[cut - 1]
            if best is None or (w, f, thr) < best:
                best = (w, f, thr)
    return best


def single_tree(X, y, max_depth=None, seed=0):
    return ForestClassifier(
        n_trees=1,
        max_depth=max_depth,
        features_per_split=None,
        bootstrap=False,
        seed=seed,
    ).fit(X, y)


def test_root_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(77)
    for trial in range(40):
        n = int(rng.integers(6, 21))
        width = int(rng.integers(1, 5))
        X = rng.standard_normal((n, width))
        y = list(rng.choice(["a", "b"], size=n))
        y[0], y[1] = "a", "b"
        want = oracle_best_split(X, y)
        if want is None:
            continue
        model = single_tree(X, np.array(y), max_depth=1)
        tree = model.trees_[0]
        assert tree["feature"][0] == want[1]
        assert tree["threshold"][0] == pytest.approx(want[2], abs=1e-12)


def test_threshold_separates_and_handles_adjacent_floats():
    # midpoint of two adjacent floats rounds up to the larger value; the
    # split must still send the smaller value left
    a = 1.0
    b = np.nextafter(a, np.inf)
    X = np.array([[a], [b], [a], [b]])
    y = np.array(["l", "r", "l", "r"])
    model = single_tree(X, y, max_depth=1)
    thr = model.trees_[0]["threshold"][0]
    assert a <= thr < b
    assert np.array_equal(model.predict(X), y.astype(object))


def test_planted_feature_takes_all_importance():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((20, 5))
    y = np.array(["a"] * 10 + ["b"] * 10)
    X[:10, 2] = rng.uniform(-1, -0.5, size=10)  # feature 2 fully separates
    X[10:, 2] = rng.uniform(0.5, 1, size=10)
    model = single_tree(X, y)
    importances = model.feature_importances_
    assert importances.sum() == pytest.approx(1.0, abs=1e-9)
    assert importances[2] >= 0.99


def test_importances_normalized_on_random_forests():
    rng = np.random.default_rng(9)
    for trial in range(5):
        X = rng.standard_normal((60, 6))
        y = rng.choice(["a", "b", "c"], size=60)
        y[:3] = ["a", "b", "c"]
        model = ForestClassifier(n_trees=12, seed=trial).fit(X, y)
        imp = model.feature_importances_
        assert imp.shape == (6,)
        assert np.all(imp >= 0)
        assert imp.sum() == pytest.approx(1.0, abs=1e-9)


def test_no_splits_when_features_constant():
    X = np.ones((10, 3))
    y = np.array(["a", "b"] * 5)
    model = ForestClassifier(n_trees=3, seed=0).fit(X, y)
    with pytest.raises(NoSplits):
        model.feature_importances_


def test_seeded_determinism():
    rng = np.random.default_rng(31)
    X = rng.standard_normal((80, 4))
    y = rng.choice(["a", "b"], size=80)
    y[:2] = ["a", "b"]
    Q = rng.standard_normal((30, 4))
    a = ForestClassifier(n_trees=10, seed=3).fit(X, y)
    b = ForestClassifier(n_trees=10, seed=3).fit(X, y)
    c = ForestClassifier(n_trees=10, seed=4).fit(X, y)
    assert np.array_equal(a.predict_proba(Q), b.predict_proba(Q))
    assert not np.array_equal(a.predict_proba(Q), c.predict_proba(Q))


def test_max_depth_and_min_leaf_limits():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((64, 3))
    y = rng.choice(["a", "b"], size=64)
    y[:2] = ["a", "b"]

    def depth_of(tree, node=0):
        if tree["feature"][node] < 0:
            return 0
        return 1 + max(
            depth_of(tree, tree["left"][node]), depth_of(tree, tree["right"][node])
        )

    shallow = single_tree(X, y, max_depth=2)
    assert depth_of(shallow.trees_[0]) <= 2

    chunky = ForestClassifier(
        n_trees=1, min_samples_leaf=10, features_per_split=None, bootstrap=False
    ).fit(X, y)

    def leaf_sizes(tree, node=0, idx=None):
        if idx is None:
            idx = np.arange(len(X))
        if tree["feature"][node] < 0:
            return [len(idx)]
        go_left = X[idx, tree["feature"][node]] <= tree["threshold"][node]
        return leaf_sizes(tree, tree["left"][node], idx[go_left]) + leaf_sizes(
            tree, tree["right"][node], idx[~go_left]
        )

    assert min(leaf_sizes(chunky.trees_[0])) >= 10


def test_proba_rows_average_leaf_distributions():
    rng = np.random.default_rng(17)
    X = rng.standard_normal((50, 3))
    y = rng.choice(["a", "b", "c"], size=50)
    y[:3] = ["a", "b", "c"]
    model = ForestClassifier(n_trees=7, seed=1).fit(X, y)
    proba = model.predict_proba(rng.standard_normal((20, 3)))
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert np.all((proba >= 0) & (proba <= 1))


def test_separable_data_high_accuracy():
    rng = np.random.default_rng(23)
    X = np.concatenate([rng.normal(-3, 0.5, (50, 2)), rng.normal(3, 0.5, (50, 2))])
    y = np.array(["a"] * 50 + ["b"] * 50)
    model = ForestClassifier(n_trees=15, seed=0).fit(X, y)
    Q = np.concatenate([rng.normal(-3, 0.5, (20, 2)), rng.normal(3, 0.5, (20, 2))])
    want = np.array(["a"] * 20 + ["b"] * 20, dtype=object)
    assert (model.predict(Q) == want).mean() == 1.0


def test_validation_errors():
    X = np.zeros((4, 2))
    y = np.array(["a", "b", "a", "b"])
    with pytest.raises(ConfigError):
        ForestClassifier(n_trees=0).fit(X, y)
    with pytest.raises(ConfigError):
        ForestClassifier(max_depth=0).fit(X, y)
    with pytest.raises(ConfigError):
        ForestClassifier(min_samples_leaf=0).fit(X, y)
    with pytest.raises(ConfigError):
        ForestClassifier(features_per_split="half").fit(X, y)
    with pytest.raises(DegenerateTraining):
        ForestClassifier().fit(X, np.array(["a"] * 4))


def test_serialization_roundtrip():
    rng = np.random.default_rng(29)
    X = rng.standard_normal((40, 3))
    y = rng.choice(["a", "b"], size=40)
    y[:2] = ["a", "b"]
    model = ForestClassifier(n_trees=5, seed=2).fit(X, y)
    back = ForestClassifier.from_dict(model.to_dict())
    Q = rng.standard_normal((15, 3))
    assert np.array_equal(back.predict(Q), model.predict(Q))
    assert np.allclose(back.predict_proba(Q), model.predict_proba(Q))
    assert np.allclose(back.feature_importances_, model.feature_importances_)
