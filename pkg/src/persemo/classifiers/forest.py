"""Random forest with Gini split search.

Each tree trains on a seeded bootstrap sample; each node searches the best
(feature, threshold) pair over a seeded random feature subset, minimizing
weighted Gini impurity.  Thresholds are midpoints between adjacent distinct
sorted values.  Tie-break order: lowest weighted impurity, then lowest
feature index, then lowest threshold.  Leaves store class-count
distributions; forest scores are the per-tree leaf distributions averaged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import ConfigError, NoSplits
from ..seeding import rng_from
from .base import ScoredClassifierMixin, check_features, check_training, encode_labels


def _gini(counts: np.ndarray, n: int) -> float:
    p = counts / n
    return float(1.0 - (p * p).sum())


def _best_split_for_feature(values, codes, n_classes, min_leaf):
    """Best cut on one feature: (weighted_gini, threshold, cut) or None.

    ``cut`` is the left-side size in the sorted order.  The first minimum
    wins, so equal impurities resolve to the lowest threshold.
    """
    n = len(values)
    order = np.argsort(values, kind="stable")
    vs = values[order]
    cs = codes[order]
    onehot = cs[:, None] == np.arange(n_classes)[None, :]
    cum = np.cumsum(onehot, axis=0, dtype=np.float64)
    total = cum[-1]

    cuts = np.arange(min_leaf, n - min_leaf + 1)
    if len(cuts) == 0:
        return None
    distinct = vs[cuts] > vs[cuts - 1]
    cuts = cuts[distinct]
    if len(cuts) == 0:
        return None

    left = cum[cuts - 1]
    right = total[None, :] - left
    nl = cuts.astype(np.float64)
    nr = n - nl
    gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    weighted = (nl * gini_l + nr * gini_r) / n

    best = int(np.argmin(weighted))
    cut = int(cuts[best])
    threshold = float((vs[cut - 1] + vs[cut]) / 2.0)
    if threshold >= vs[cut]:  # adjacent floats: midpoint rounded up
        threshold = float(vs[cut - 1])
    return float(weighted[best]), threshold, cut, order


def _build_tree(X, codes, n_classes, rng, max_depth, min_leaf, n_subset):
    """Grow one tree; returns array-form nodes and raw importance gains.

    Nodes are processed preorder (left subtree before right): the feature
    subset for a node is drawn from ``rng`` when the node is expanded, which
    pins the random stream layout.
    """
    n_total, n_features = X.shape
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    dist: list[np.ndarray] = []
    gains = np.zeros(n_features, dtype=np.float64)

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        dist.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n_total), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(codes[idx], minlength=n_classes)
        n = len(idx)
        dist[node] = counts / n
        node_gini = _gini(counts, n)

        splittable = (
            node_gini > 0.0
            and n >= 2 * min_leaf
            and (max_depth is None or depth < max_depth)
        )
        if not splittable:
            continue

        if n_subset >= n_features:
            subset = np.arange(n_features)
        else:
            subset = np.sort(rng.choice(n_features, size=n_subset, replace=False))

        best = None  # (weighted, feature, threshold, cut, order)
        for f in subset:
            found = _best_split_for_feature(X[idx, f], codes[idx], n_classes, min_leaf)
            if found is None:
                continue
            weighted, thr, cut, order = found
            if best is None or weighted < best[0]:
                best = (weighted, int(f), thr, cut, order)
        if best is None:
            continue

        weighted, f, thr, cut, order = best
        gains[f] += (n / n_total) * (node_gini - weighted)
        left_idx = np.sort(idx[order[:cut]])
        right_idx = np.sort(idx[order[cut:]])

        feature[node] = f
        threshold[node] = thr
        lid = new_node()
        rid = new_node()
        left[node] = lid
        right[node] = rid
        stack.append((rid, right_idx, depth + 1))
        stack.append((lid, left_idx, depth + 1))

    return {
        "feature": np.asarray(feature, dtype=np.int64),
        "threshold": np.asarray(threshold, dtype=np.float64),
        "left": np.asarray(left, dtype=np.int64),
        "right": np.asarray(right, dtype=np.int64),
        "dist": np.vstack(dist),
    }, gains


def _tree_scores(tree, X):
    node = np.zeros(len(X), dtype=np.int64)
    feature = tree["feature"]
    active = feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = X[rows, feature[cur]] <= tree["threshold"][cur]
        node[rows] = np.where(go_left, tree["left"][cur], tree["right"][cur])
        active = feature[node] >= 0
    return tree["dist"][node]


class ForestClassifier(ScoredClassifierMixin, ClassifierMixin, BaseEstimator):
    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = None,
        min_samples_leaf: int = 1,
        features_per_split: int | str | None = "sqrt",
        bootstrap: bool = True,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed

    def _resolve_subset_size(self, n_features: int) -> int:
        f = self.features_per_split
        if f is None or f == "all":
            return n_features
        if f == "sqrt":
            return max(1, int(np.floor(np.sqrt(n_features))))
        if isinstance(f, (int, np.integer)) and f >= 1:
            return min(int(f), n_features)
        raise ConfigError(f"bad features_per_split: {f!r}")

    def fit(self, X, y):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1 (or None)")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be at least 1")
        X, y = check_training(X, y)
        self.classes_, codes = encode_labels(y)
        n_classes = len(self.classes_)
        n = len(X)
        n_subset = self._resolve_subset_size(X.shape[1])

        self.trees_ = []
        gains = np.zeros(X.shape[1], dtype=np.float64)
        for t in range(self.n_trees):
            rng = rng_from(self.seed, "tree", t)
            if self.bootstrap:
                sample = np.sort(rng.integers(0, n, size=n))
            else:
                sample = np.arange(n)
            tree, tree_gains = _build_tree(
                X[sample],
                codes[sample],
                n_classes,
                rng,
                self.max_depth,
                self.min_samples_leaf,
                n_subset,
            )
            self.trees_.append(tree)
            gains += tree_gains

        self.raw_feature_importances_ = gains / self.n_trees
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def feature_importances_(self) -> np.ndarray:
        """Impurity-decrease importances normalized to sum to 1."""
        raw = self.raw_feature_importances_
        total = raw.sum()
        if total <= 0.0:
            raise NoSplits("no tree in the forest performed a split")
        return raw / total

    def predict_proba(self, X):
        X = check_features(X)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(
                f"query width {X.shape[1]} != training width {self.n_features_in_}"
            )
        acc = np.zeros((len(X), len(self.classes_)), dtype=np.float64)
        for tree in self.trees_:
            acc += _tree_scores(tree, X)
        return acc / len(self.trees_)

    def to_dict(self) -> dict:
        return {
            "params": {
                "n_trees": int(self.n_trees),
                "max_depth": None if self.max_depth is None else int(self.max_depth),
                "min_samples_leaf": int(self.min_samples_leaf),
                "features_per_split": self.features_per_split,
                "bootstrap": bool(self.bootstrap),
                "seed": int(self.seed),
            },
            "classes": self.classes_.tolist(),
            "n_features": int(self.n_features_in_),
            "raw_importances": self.raw_feature_importances_.tolist(),
            "trees": [
                {
                    "feature": t["feature"].tolist(),
                    "threshold": t["threshold"].tolist(),
                    "left": t["left"].tolist(),
                    "right": t["right"].tolist(),
                    "dist": t["dist"].tolist(),
                }
                for t in self.trees_
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ForestClassifier":
        est = cls(**payload["params"])
        est.classes_ = np.asarray(payload["classes"], dtype=object).astype(str)
        est.n_features_in_ = int(payload["n_features"])
        est.raw_feature_importances_ = np.asarray(
            payload["raw_importances"], dtype=np.float64
        )
        est.trees_ = [
            {
                "feature": np.asarray(t["feature"], dtype=np.int64),
                "threshold": np.asarray(t["threshold"], dtype=np.float64),
                "left": np.asarray(t["left"], dtype=np.int64),
                "right": np.asarray(t["right"], dtype=np.int64),
                "dist": np.asarray(t["dist"], dtype=np.float64),
            }
            for t in payload["trees"]
        ]
        return est
