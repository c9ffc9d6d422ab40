"""Shared plumbing for the classifier families: input checks, label
encoding, and the score-to-label rule (argmax, ties to the lowest class
index)."""

from __future__ import annotations

import numpy as np

from ..errors import DataError, DegenerateTraining


def check_features(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D feature array, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError("feature array contains non-finite values")
    return X


def check_training(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = check_features(X)
    y = np.asarray(y, dtype=object)
    if len(y) != len(X):
        raise DataError(f"X has {len(X)} rows but y has {len(y)}")
    if len(X) == 0:
        raise DataError("training set is empty")
    return X, y


def encode_labels(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted unique classes and integer codes; needs at least two classes."""
    classes, codes = np.unique(y.astype(str), return_inverse=True)
    if len(classes) < 2:
        raise DegenerateTraining(
            f"training labels contain {len(classes)} class(es), need at least 2"
        )
    return classes, codes


class ScoredClassifierMixin:
    """predict() derived from predict_proba(); first maximum wins, so score
    ties resolve to the lowest class index."""

    def predict(self, X):
        scores = self.predict_proba(X)
        return self.classes_[np.argmax(scores, axis=1)]
