"""Per-subject dataset curation.

Holds the labeled, temporally ordered frame streams for one subject and the
operations that turn raw streams into model-ready training material:
eligibility screening, seeded balanced subsampling, pooled generic training
sets, temporal holdout splits and z-score standardization.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    ConfigError,
    DataError,
    DegenerateSplit,
    EmptyClass,
    EmptyPool,
    InsufficientEmotions,
    SchemaMismatch,
)
from .ingest import ACTUAL_EMOTIONS, FeatureSchema, aggregate_table
from .seeding import rng_from

log = logging.getLogger(__name__)

SPLIT_MODES = ("temporal_holdout", "nested_cv")
GENERIC_MODES = ("pool_all", "leave_one_out")


@dataclass
class SubjectDataset:
    """Labeled, temporally ordered frames for one subject (or a pool).

    Frames are stored column-wise: ``features[i]`` belongs to ``labels[i]``,
    ``clip_ids[i]`` and ``frame_indices[i]``.  Rows are sorted by (clip,
    frame) and frame indices are strictly increasing within a clip.  For
    pooled datasets ``source_subjects`` records where each row came from.
    """

    subject_id: str
    features: np.ndarray
    labels: np.ndarray
    clip_ids: np.ndarray
    frame_indices: np.ndarray
    feature_names: tuple[str, ...]
    schema_hash: str
    source_subjects: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=object)
        self.clip_ids = np.asarray(self.clip_ids, dtype=object)
        self.frame_indices = np.asarray(self.frame_indices, dtype=np.int64)
        n = len(self.features)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D array")
        if not (len(self.labels) == len(self.clip_ids) == len(self.frame_indices) == n):
            raise DataError("dataset columns have mismatched lengths")
        if self.features.shape[1] != len(self.feature_names):
            raise DataError("feature width does not match feature_names")
        if not np.isfinite(self.features).all():
            raise DataError("dataset contains non-finite feature values")
        unknown = set(self.labels) - set(ACTUAL_EMOTIONS)
        if unknown:
            raise DataError(f"unknown emotion labels {sorted(unknown)}")
        if self.source_subjects is not None:
            self.source_subjects = np.asarray(self.source_subjects, dtype=object)
            if len(self.source_subjects) != n:
                raise DataError("source_subjects length mismatch")
        self._check_temporal_order()

    def _check_temporal_order(self):
        order = np.lexsort((self.frame_indices, self.clip_ids.astype(str)))
        if not np.array_equal(order, np.arange(len(order))):
            raise DataError(
                f"dataset {self.subject_id!r} is not sorted by (clip, frame)"
            )
        for clip in pd.unique(self.clip_ids):
            idx = self.frame_indices[self.clip_ids == clip]
            if len(idx) > 1 and not (np.diff(idx) > 0).all():
                raise DataError(
                    f"frame indices not strictly increasing in clip {clip!r}"
                )

    @property
    def n_frames(self) -> int:
        return len(self.features)

    def label_histogram(self) -> dict[str, int]:
        out = {emo: 0 for emo in ACTUAL_EMOTIONS}
        for label in self.labels:
            out[label] += 1
        return out

    def select(self, indices: np.ndarray) -> "SubjectDataset":
        """Row subset; ``indices`` must be ascending to keep temporal order."""
        indices = np.asarray(indices, dtype=np.int64)
        return SubjectDataset(
            subject_id=self.subject_id,
            features=self.features[indices],
            labels=self.labels[indices],
            clip_ids=self.clip_ids[indices],
            frame_indices=self.frame_indices[indices],
            feature_names=self.feature_names,
            schema_hash=self.schema_hash,
            source_subjects=(
                None if self.source_subjects is None else self.source_subjects[indices]
            ),
        )

    def to_dict(self, provenance: dict | None = None) -> dict:
        payload = {
            "subject_id": self.subject_id,
            "feature_names": list(self.feature_names),
            "schema_hash": self.schema_hash,
            "frames": [
                {
                    "clip": self.clip_ids[i],
                    "frame": int(self.frame_indices[i]),
                    "actual": self.labels[i],
                    "features": self.features[i].tolist(),
                    **(
                        {"source_subject": self.source_subjects[i]}
                        if self.source_subjects is not None
                        else {}
                    ),
                }
                for i in range(self.n_frames)
            ],
        }
        if provenance is not None:
            payload["provenance"] = provenance
        return payload

    def to_json(self, provenance: dict | None = None) -> str:
        return json.dumps(self.to_dict(provenance), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, payload: dict) -> "SubjectDataset":
        frames = payload["frames"]
        has_source = bool(frames) and "source_subject" in frames[0]
        return cls(
            subject_id=payload["subject_id"],
            features=np.array([f["features"] for f in frames], dtype=np.float64)
            if frames
            else np.empty((0, len(payload["feature_names"]))),
            labels=np.array([f["actual"] for f in frames], dtype=object),
            clip_ids=np.array([f["clip"] for f in frames], dtype=object),
            frame_indices=np.array([f["frame"] for f in frames], dtype=np.int64),
            feature_names=tuple(payload["feature_names"]),
            schema_hash=payload["schema_hash"],
            source_subjects=(
                np.array([f["source_subject"] for f in frames], dtype=object)
                if has_source
                else None
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "SubjectDataset":
        return cls.from_dict(json.loads(text))


def datasets_from_table(df: pd.DataFrame, schema: FeatureSchema) -> list[SubjectDataset]:
    """Aggregate a validated frame table into per-subject datasets.

    Unlabeled frames (no actual emotion) are dropped here: downstream
    curation and training operate on labeled material only.
    """
    labeled = df[df["actual"].notna()].reset_index(drop=True)
    features = aggregate_table(labeled, schema)
    out = []
    for subject in sorted(labeled["subject"].unique()):
        mask = (labeled["subject"] == subject).to_numpy()
        sub = labeled[mask]
        out.append(
            SubjectDataset(
                subject_id=str(subject),
                features=features[mask],
                labels=sub["actual"].to_numpy(object),
                clip_ids=sub["clip"].to_numpy(object),
                frame_indices=sub["frame"].to_numpy(np.int64),
                feature_names=schema.feature_names,
                schema_hash=schema.hash(),
            )
        )
    return out


@dataclass(frozen=True)
class CurationPolicy:
    """Thresholds and seeds for turning raw streams into balanced subsets."""

    min_labels_per_emotion: int = 1600
    target_per_class: int = 1600
    min_emotions: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.min_labels_per_emotion <= 0:
            raise ConfigError("min_labels_per_emotion must be positive")
        if self.target_per_class <= 0:
            raise ConfigError("target_per_class must be positive")
        if self.min_emotions < 2:
            raise ConfigError("min_emotions must be at least 2")


@dataclass(frozen=True)
class SplitPlan:
    """How a curated dataset is divided for training and evaluation."""

    mode: str = "temporal_holdout"
    train_fraction: float = 0.8
    outer_folds: int = 10
    inner_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise ConfigError(f"unknown split mode {self.mode!r}")
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ConfigError("fold counts must be at least 2")


def eligible_emotions(ds: SubjectDataset, policy: CurationPolicy) -> set[str]:
    """Emotions with at least ``min_labels_per_emotion`` labeled frames."""
    hist = ds.label_histogram()
    eligible = {
        emo for emo, count in hist.items() if count >= policy.min_labels_per_emotion
    }
    if len(eligible) < policy.min_emotions:
        raise InsufficientEmotions(ds.subject_id, len(eligible), policy.min_emotions)
    return eligible


def _sample_class_indices(
    idx: np.ndarray, target: int, rng: np.random.Generator, emotion: str, owner: str
) -> np.ndarray:
    take = min(target, len(idx))
    if take < target:
        log.warning(
            "class %r for %r below target: kept %d of requested %d",
            emotion,
            owner,
            take,
            target,
        )
    chosen = rng.choice(len(idx), size=take, replace=False)
    chosen.sort()
    return idx[chosen]


def balanced_subsample(
    ds: SubjectDataset, emotions: set[str], policy: CurationPolicy
) -> SubjectDataset:
    """Per-class seeded subsample to ``target_per_class``, keeping time order.

    Classes short of the target keep everything they have (with a logged
    warning).  The sampler seed derives from (policy.seed, subject_id) so
    each subject draws from its own stream.
    """
    rng = rng_from(policy.seed, "subsample", ds.subject_id)
    keep: list[np.ndarray] = []
    for emotion in sorted(emotions):
        idx = np.flatnonzero(ds.labels == emotion)
        if len(idx) == 0:
            raise EmptyClass(emotion)
        keep.append(
            _sample_class_indices(idx, policy.target_per_class, rng, emotion, ds.subject_id)
        )
    indices = np.sort(np.concatenate(keep))
    return ds.select(indices)


def build_generic(
    subjects: list[SubjectDataset],
    emotions: set[str],
    policy: CurationPolicy,
    exclude_subject: str | None = None,
) -> SubjectDataset:
    """Pooled balanced training set over ``subjects`` for one emotion set.

    Each contributing subject's frames are filtered to ``emotions``, pooled,
    then sampled down to ``target_per_class`` per class.  Clip ids are
    prefixed with the source subject so temporal ordering stays well defined
    within the pool.
    """
    contributors = [s for s in subjects if s.subject_id != exclude_subject]
    if not contributors:
        raise EmptyPool("no subjects remain after exclusion")
    hashes = {s.schema_hash for s in contributors}
    if len(hashes) != 1:
        raise SchemaMismatch(f"pool mixes schemas: {sorted(hashes)}")

    features, labels, clips, frames, sources = [], [], [], [], []
    for s in sorted(contributors, key=lambda s: s.subject_id):
        mask = np.isin(s.labels.astype(str), sorted(emotions))
        if not mask.any():
            continue
        features.append(s.features[mask])
        labels.append(s.labels[mask])
        clips.append(
            np.array([f"{s.subject_id}/{c}" for c in s.clip_ids[mask]], dtype=object)
        )
        frames.append(s.frame_indices[mask])
        src = (
            s.source_subjects[mask]
            if s.source_subjects is not None
            else np.full(mask.sum(), s.subject_id, dtype=object)
        )
        sources.append(src)
    if not features:
        raise EmptyPool("no pooled frames carry the requested emotions")

    pooled = SubjectDataset(
        subject_id="generic" if exclude_subject is None else f"generic-minus-{exclude_subject}",
        features=np.concatenate(features),
        labels=np.concatenate(labels),
        clip_ids=np.concatenate(clips),
        frame_indices=np.concatenate(frames),
        feature_names=contributors[0].feature_names,
        schema_hash=contributors[0].schema_hash,
        source_subjects=np.concatenate(sources),
    )

    scope = exclude_subject if exclude_subject is not None else "all"
    rng = rng_from(policy.seed, "generic", scope, *sorted(emotions))
    keep: list[np.ndarray] = []
    for emotion in sorted(emotions):
        idx = np.flatnonzero(pooled.labels == emotion)
        if len(idx) == 0:
            raise EmptyClass(emotion)
        keep.append(
            _sample_class_indices(
                idx, policy.target_per_class, rng, emotion, pooled.subject_id
            )
        )
    return pooled.select(np.sort(np.concatenate(keep)))


def temporal_split(ds: SubjectDataset, plan: SplitPlan) -> tuple[np.ndarray, np.ndarray]:
    """Per-clip earlier/later split at ``floor(train_fraction * n_clip)``.

    Returns (train_indices, test_indices) into ``ds``.  Every training frame
    within a clip precedes every test frame of that clip.
    """
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    # rows are clip-grouped by the dataset's sort order
    for clip in pd.unique(ds.clip_ids):
        idx = np.flatnonzero(ds.clip_ids == clip)
        cut = int(np.floor(plan.train_fraction * len(idx)))
        train.append(idx[:cut])
        test.append(idx[cut:])
    train_idx = np.sort(np.concatenate(train)) if train else np.empty(0, np.int64)
    test_idx = np.sort(np.concatenate(test)) if test else np.empty(0, np.int64)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DegenerateSplit(
            f"temporal split of {ds.subject_id!r} left train={len(train_idx)}, "
            f"test={len(test_idx)} frames"
        )
    return train_idx, test_idx


class Standardizer(BaseEstimator, TransformerMixin):
    """Column-wise z-scoring with population standard deviation.

    Columns with zero deviation map to exactly 0 rather than dividing by
    zero.  Fit on training rows only; transforming test rows with training
    statistics is what keeps evaluation leak-free.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) == 0:
            raise DataError("standardizer needs a non-empty 2-D array")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)  # population: ddof=0
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise DataError("standardizer is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DataError("standardizer width mismatch")
        with np.errstate(invalid="ignore", divide="ignore"):
            z = (X - self.mean_) / self.scale_
        return np.where(self.scale_ > 0, z, 0.0)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardizer":
        est = cls()
        est.mean_ = np.asarray(payload["mean"], dtype=np.float64)
        est.scale_ = np.asarray(payload["scale"], dtype=np.float64)
        est.n_features_in_ = len(est.mean_)
        return est
