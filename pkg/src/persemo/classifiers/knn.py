"""k-nearest-neighbour classifier.

Plain Euclidean distance, scores are vote fractions over the k neighbours.
Distance ties resolve to the lower training index (stable argsort), score
ties to the lower class index.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import ConfigError, KTooLarge
from .base import ScoredClassifierMixin, check_features, check_training, encode_labels

# test-row block size for the pairwise distance computation; bounds memory at
# roughly block * n_train * n_features floats
_BLOCK = 32


class KnnClassifier(ScoredClassifierMixin, ClassifierMixin, BaseEstimator):
    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        X, y = check_training(X, y)
        if self.k > len(X):
            raise KTooLarge(self.k, len(X))
        self.classes_, self._codes = encode_labels(y)
        self._train = X
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = check_features(X)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(
                f"query width {X.shape[1]} != training width {self.n_features_in_}"
            )
        n_classes = len(self.classes_)
        out = np.empty((len(X), n_classes), dtype=np.float64)
        for start in range(0, len(X), _BLOCK):
            block = X[start : start + _BLOCK]
            # squared-diff form with a last-axis reduction, not the dot-product
            # identity: same floating arithmetic as a naive per-row computation
            diff = block[:, None, :] - self._train[None, :, :]
            np.multiply(diff, diff, out=diff)
            d2 = diff.sum(axis=2)
            order = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            votes = self._codes[order]
            out[start : start + len(block)] = (
                votes[:, :, None] == np.arange(n_classes)[None, None, :]
            ).mean(axis=1)
        return out

    def to_dict(self) -> dict:
        return {
            "k": int(self.k),
            "classes": self.classes_.tolist(),
            "train": self._train.tolist(),
            "codes": self._codes.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "KnnClassifier":
        est = cls(k=int(payload["k"]))
        est.classes_ = np.asarray(payload["classes"], dtype=object).astype(str)
        est._train = np.asarray(payload["train"], dtype=np.float64)
        est._codes = np.asarray(payload["codes"], dtype=np.int64)
        est.n_features_in_ = est._train.shape[1]
        return est
