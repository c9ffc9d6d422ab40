"""k-nearest-neighbour classifier against a brute-force oracle."""

import numpy as np
import pytest

from persemo.classifiers.knn import KnnClassifier
from persemo.errors import ConfigError, DegenerateTraining, KTooLarge


def oracle_predict(X_train, y_train, X_test, k):
    """Independent per-row reference: stable distance sort, majority vote,
    vote ties to the lowest class index."""
    classes = sorted(set(y_train))
    index = {c: i for i, c in enumerate(classes)}
    preds, probas = [], []
    for x in X_test:
        d = ((X_train - x) ** 2).sum(axis=1)
        nearest = np.argsort(d, kind="stable")[:k]
        votes = np.zeros(len(classes))
        for j in nearest:
            votes[index[y_train[j]]] += 1.0
        probas.append(votes / k)
        preds.append(classes[int(np.argmax(votes))])
    return np.array(preds, dtype=object), np.array(probas)


def test_matches_oracle_on_random_instances():
    rng = np.random.default_rng(101)
    for trial in range(30):
        n = int(rng.integers(10, 120))
        width = int(rng.integers(1, 8))
        n_classes = int(rng.integers(2, 5))
        X_train = rng.standard_normal((n, width))
        y_train = rng.choice([f"c{i}" for i in range(n_classes)], size=n)
        # force both classes present
        y_train[0], y_train[1] = "c0", "c1"
        X_test = rng.standard_normal((int(rng.integers(1, 40)), width))
        for k in (1, 3, 5):
            if k > n:
                continue
            model = KnnClassifier(k=k).fit(X_train, y_train)
            want_pred, want_proba = oracle_predict(X_train, y_train, X_test, k)
            assert np.array_equal(model.predict(X_test), want_pred)
            assert np.allclose(model.predict_proba(X_test), want_proba)


def test_k1_memorizes_training_points():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 3))
    y = rng.choice(["a", "b", "c"], size=40)
    y[:3] = ["a", "b", "c"]
    model = KnnClassifier(k=1).fit(X, y)
    assert np.array_equal(model.predict(X), y.astype(object))


def test_distance_tie_prefers_lower_training_index():
    X = np.array([[0.0], [2.0]])
    y = np.array(["b", "a"])
    model = KnnClassifier(k=1).fit(X, y)
    # the query sits exactly between both points; index 0 wins
    assert model.predict(np.array([[1.0]]))[0] == "b"


def test_vote_tie_prefers_lower_class_index():
    X = np.array([[0.0], [2.0]])
    y = np.array(["b", "a"])
    model = KnnClassifier(k=2).fit(X, y)
    proba = model.predict_proba(np.array([[1.0]]))
    assert proba.tolist() == [[0.5, 0.5]]
    assert model.predict(np.array([[1.0]]))[0] == "a"


def test_block_boundary_consistency():
    # one query batch spanning several 32-row blocks equals per-row queries
    rng = np.random.default_rng(8)
    X_train = rng.standard_normal((50, 4))
    y_train = rng.choice(["a", "b"], size=50)
    y_train[:2] = ["a", "b"]
    X_test = rng.standard_normal((100, 4))
    model = KnnClassifier(k=5).fit(X_train, y_train)
    full = model.predict_proba(X_test)
    rows = np.vstack([model.predict_proba(X_test[i : i + 1]) for i in range(100)])
    assert np.array_equal(full, rows)


def test_proba_rows_sum_to_one():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((30, 2))
    y = rng.choice(["a", "b", "c"], size=30)
    y[:3] = ["a", "b", "c"]
    proba = KnnClassifier(k=5).fit(X, y).predict_proba(rng.standard_normal((20, 2)))
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_validation_errors():
    X = np.zeros((3, 1))
    y = np.array(["a", "b", "a"])
    with pytest.raises(KTooLarge):
        KnnClassifier(k=4).fit(X, y)
    with pytest.raises(ConfigError):
        KnnClassifier(k=0).fit(X, y)
    with pytest.raises(DegenerateTraining):
        KnnClassifier(k=1).fit(X, np.array(["a", "a", "a"]))
    model = KnnClassifier(k=1).fit(X, y)
    with pytest.raises(ConfigError):
        model.predict(np.zeros((2, 3)))


def test_serialization_roundtrip():
    rng = np.random.default_rng(21)
    X = rng.standard_normal((35, 3))
    y = rng.choice(["a", "b"], size=35)
    y[:2] = ["a", "b"]
    model = KnnClassifier(k=3).fit(X, y)
    back = KnnClassifier.from_dict(model.to_dict())
    Q = rng.standard_normal((15, 3))
    assert np.array_equal(back.predict(Q), model.predict(Q))
    assert np.allclose(back.predict_proba(Q), model.predict_proba(Q))
