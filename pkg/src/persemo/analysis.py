"""Exploratory analyses: PCA, class separability, feature correlations,
and cross-subject comparison of forest feature importances."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, DataError, SchemaMismatch, SingleClass

log = logging.getLogger(__name__)


class Pca(BaseEstimator, TransformerMixin):
    """Principal components via eigendecomposition of the covariance matrix.

    Components are orthonormal, ordered by descending eigenvalue, and
    sign-fixed so each component's largest-magnitude entry is positive.
    If fewer than ``n_components`` strictly positive eigenvalues exist the
    model still fits but flags ``rank_deficient_`` (and logs a warning).
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) < 2:
            raise DataError("pca needs at least two rows")
        if not (1 <= self.n_components <= X.shape[1]):
            raise ConfigError(
                f"n_components must lie in [1, {X.shape[1]}], got {self.n_components}"
            )
        self.mean_ = X.mean(axis=0)
        cov = np.cov(X, rowvar=False, ddof=1)
        cov = np.atleast_2d(cov)
        eigenvalues, eigenvectors = np.linalg.eigh(cov)
        order = np.argsort(eigenvalues)[::-1]
        eigenvalues = np.clip(eigenvalues[order], 0.0, None)
        eigenvectors = eigenvectors[:, order]
        # sign convention: largest-|entry| coordinate positive
        for j in range(eigenvectors.shape[1]):
            pivot = int(np.argmax(np.abs(eigenvectors[:, j])))
            if eigenvectors[pivot, j] < 0:
                eigenvectors[:, j] = -eigenvectors[:, j]

        r = self.n_components
        self.eigenvalues_ = eigenvalues
        self.components_ = eigenvectors[:, :r]
        self.explained_variance_ = eigenvalues[:r]
        self.total_variance_ = float(eigenvalues.sum())
        self.explained_variance_ratio_ = (
            self.explained_variance_ / self.total_variance_
            if self.total_variance_ > 0
            else np.zeros(r)
        )
        self.rank_deficient_ = bool((eigenvalues[:r] <= 0.0).any())
        if self.rank_deficient_:
            log.warning(
                "pca retained %d components but only %d positive eigenvalues",
                r,
                int((eigenvalues > 0).sum()),
            )
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "components_"):
            raise DataError("pca is not fitted")
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_

    def inverse_transform(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return Z @ self.components_.T + self.mean_


# row-block size for pairwise distance accumulation
_CHUNK = 512


def silhouette_score(X, labels) -> float:
    """Mean silhouette value over all points, Euclidean distances.

    For each point: a = mean distance to its own class (excluding itself),
    b = smallest mean distance to another class, s = (b - a) / max(a, b).
    Needs at least two classes; singleton-class points score 0.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=object)
    if X.ndim != 2 or len(X) != len(labels):
        raise DataError("features and labels misaligned")
    classes = sorted(set(labels.astype(str)))
    if len(classes) < 2:
        raise SingleClass(f"silhouette needs >= 2 classes, got {len(classes)}")

    n = len(X)
    class_masks = [(labels == c) for c in classes]
    counts = np.array([m.sum() for m in class_masks], dtype=np.float64)
    sq_norms = (X * X).sum(axis=1)

    total = 0.0
    for start in range(0, n, _CHUNK):
        block = slice(start, min(start + _CHUNK, n))
        d2 = (
            sq_norms[block][:, None]
            + sq_norms[None, :]
            - 2.0 * (X[block] @ X.T)
        )
        dist = np.sqrt(np.clip(d2, 0.0, None))
        # mean distance from each block row to each class
        sums = np.stack([dist[:, m].sum(axis=1) for m in class_masks], axis=1)
        own = np.array([classes.index(l) for l in labels[block]])
        rows = np.arange(sums.shape[0])

        own_count = counts[own]
        a = np.where(own_count > 1, sums[rows, own] / np.maximum(own_count - 1, 1), 0.0)
        mean_other = sums / counts[None, :]
        mean_other[rows, own] = np.inf
        b = mean_other.min(axis=1)

        denom = np.maximum(a, b)
        s = np.where(
            (own_count > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0
        )
        total += s.sum()
    return float(total / n)


@dataclass
class SeparabilityReport:
    """Separability summary: silhouette on the full space plus a 2-D view."""

    subject_id: str
    silhouette: float
    classes: tuple[str, ...]
    projection: np.ndarray  # (n, 2)
    labels: np.ndarray
    centroid_distances: dict[str, float]
    explained_variance_ratio: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "silhouette": self.silhouette,
            "classes": list(self.classes),
            "projection": self.projection.tolist(),
            "labels": self.labels.tolist(),
            "centroid_distances": self.centroid_distances,
            "explained_variance_ratio": list(self.explained_variance_ratio),
        }

    def to_json(self, provenance: dict | None = None) -> str:
        payload = self.to_dict()
        if provenance is not None:
            payload["provenance"] = provenance
        return json.dumps(payload, sort_keys=True, indent=2)


def separability_report(
    X, labels, subject_id: str = ""
) -> SeparabilityReport:
    """Silhouette on the full (already standardized) space plus a 2-D PCA
    projection for plotting.  The silhouette is NOT computed on the
    projection."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=object)
    classes = tuple(sorted(set(labels.astype(str))))
    score = silhouette_score(X, labels)
    pca = Pca(n_components=min(2, X.shape[1])).fit(X)
    projection = pca.transform(X)
    if projection.shape[1] == 1:
        projection = np.hstack([projection, np.zeros((len(projection), 1))])

    centroids = {c: X[labels == c].mean(axis=0) for c in classes}
    distances = {}
    for i, a in enumerate(classes):
        for b in classes[i + 1 :]:
            distances[f"{a}|{b}"] = float(np.linalg.norm(centroids[a] - centroids[b]))

    ratio = pca.explained_variance_ratio_
    ratio2 = (float(ratio[0]), float(ratio[1]) if len(ratio) > 1 else 0.0)
    return SeparabilityReport(
        subject_id=subject_id,
        silhouette=score,
        classes=classes,
        projection=projection,
        labels=labels,
        centroid_distances=distances,
        explained_variance_ratio=ratio2,
    )


@dataclass
class CorrelationMatrix:
    """Pearson correlations; constant features are absent (None), not zero."""

    feature_names: tuple[str, ...]
    values: np.ndarray  # NaN marks undefined entries
    constant_features: tuple[str, ...]

    def to_dict(self) -> dict:
        cells = [
            [None if not np.isfinite(v) else float(v) for v in row]
            for row in self.values
        ]
        return {
            "feature_names": list(self.feature_names),
            "values": cells,
            "constant_features": list(self.constant_features),
        }


def correlation_matrix(X, feature_names) -> CorrelationMatrix:
    """Pairwise Pearson correlations, exactly symmetric, clipped to [-1, 1].

    Rows/columns of zero-variance features are NaN (reported as absent)
    rather than a fabricated 0 or 1.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise DataError("correlation needs at least two rows")
    names = tuple(feature_names)
    if X.shape[1] != len(names):
        raise DataError("feature_names width mismatch")

    centered = X - X.mean(axis=0)
    std = centered.std(axis=0)
    constant = std == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        Z = centered / std
    Z[:, constant] = 0.0
    corr = (Z.T @ Z) / len(X)
    corr = np.triu(corr) + np.triu(corr, 1).T  # enforce exact symmetry
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    corr[constant, :] = np.nan
    corr[:, constant] = np.nan
    return CorrelationMatrix(
        feature_names=names,
        values=corr,
        constant_features=tuple(np.asarray(names, dtype=object)[constant].astype(str)),
    )


def rank_features(importances: np.ndarray, feature_names) -> list[str]:
    """Feature names by descending importance; ties keep schema order."""
    importances = np.asarray(importances, dtype=np.float64)
    order = np.argsort(-importances, kind="stable")
    names = list(feature_names)
    return [names[i] for i in order]


def importance_comparison(
    models: dict[str, object], feature_names, top_k: int = 10
) -> dict:
    """Cross-subject comparison of forest importance rankings.

    Returns per-subject rankings (descending, ties in schema order) and the
    pairwise top-``top_k`` overlap counts.  All models must agree with the
    schema width.
    """
    names = tuple(feature_names)
    rankings: dict[str, list[str]] = {}
    for subject in sorted(models):
        model = models[subject]
        if getattr(model, "n_features_in_", None) != len(names):
            raise SchemaMismatch(
                f"model for {subject!r} expects {getattr(model, 'n_features_in_', '?')} "
                f"features, schema has {len(names)}"
            )
        rankings[subject] = rank_features(model.feature_importances_, names)

    subjects = sorted(rankings)
    overlap: dict[str, dict[str, int]] = {}
    for a in subjects:
        overlap[a] = {}
        top_a = set(rankings[a][:top_k])
        for b in subjects:
            top_b = set(rankings[b][:top_k])
            overlap[a][b] = len(top_a & top_b)
    return {"rankings": rankings, "top_k": top_k, "overlap": overlap}
