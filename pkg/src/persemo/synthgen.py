"""Synthetic cohort generator.

Each subject draws frames per emotion from a Gaussian whose mean is
``separation * (w * backbone[emotion] + (1 - w) * subject_direction[emotion])``
with diagonal covariance.  ``backbone`` is shared across the cohort (weight
``w``); the subject directions live on a per-subject informative feature
subset.  With separation 0 every class mean coincides, so no classifier can
beat chance.

A nonzero ``drift_rate`` translates each class mean over the stream: at frame
``t`` the subject's idiosyncratic component is replaced by the cohort-typical
one in proportion ``min(drift_rate * t, 1)``, so the mean moves linearly from
its stream-start position toward ``separation * backbone[emotion]`` and stays
there once converged.  Under a temporal split this creates a train/test
distribution shift: early frames reflect the subject's own style, late frames
the cohort's.

``benchmark_cohort`` builds the standard ten-subject fixture: eight subjects
with strong stable personal structure, two who start the session expressing
each emotion with another emotion's cohort-typical pattern and drift to the
correct pattern as the session progresses.  The drifters' curated datasets
have no stable class clusters (every class sweeps the same tube of feature
space), which is the regime where pooled generic models tend to win.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .curation import SubjectDataset
from .errors import InvalidSpec
from .ingest import ACTUAL_EMOTIONS, FeatureSchema, default_schema
from .seeding import rng_from

PROMPT_FOR_ACTUAL = {
    "anger": "anger",
    "disgust": "disgust",
    "sadness": "sadness",
    "neutral": "neutral",
    "surprise": "surprise",
    "happiness": "amusement",
}


@dataclass(frozen=True)
class SubjectProfile:
    """Generative parameters for one synthetic subject.

    ``emotion_means`` holds unit-scale per-emotion direction vectors,
    supported on ``informative_features``; the actual class mean is this
    direction blended with the cohort backbone and scaled by ``separation``.
    """

    subject_id: str
    emotions: tuple[str, ...]
    emotion_means: dict[str, np.ndarray]
    variances: dict[str, np.ndarray]
    separation: float
    informative_features: tuple[int, ...]
    frames_per_emotion: int
    drift_rate: float = 0.0

    def validate(self, width: int) -> None:
        if len(self.emotions) < 2:
            raise InvalidSpec(
                f"subject {self.subject_id!r} needs >= 2 emotions, "
                f"has {len(self.emotions)}"
            )
        unknown = set(self.emotions) - set(ACTUAL_EMOTIONS)
        if unknown:
            raise InvalidSpec(f"unknown emotions {sorted(unknown)}")
        if len(set(self.emotions)) != len(self.emotions):
            raise InvalidSpec(f"subject {self.subject_id!r} repeats an emotion")
        if not np.isfinite(self.separation) or self.separation < 0:
            raise InvalidSpec("separation must be finite and >= 0")
        if self.separation > 0 and len(self.informative_features) == 0:
            raise InvalidSpec("positive separation requires informative features")
        if any(not (0 <= i < width) for i in self.informative_features):
            raise InvalidSpec("informative feature index out of range")
        if self.frames_per_emotion < 1:
            raise InvalidSpec("frames_per_emotion must be >= 1")
        if not np.isfinite(self.drift_rate) or self.drift_rate < 0:
            raise InvalidSpec("drift_rate must be finite and >= 0")
        if set(self.emotion_means) != set(self.emotions):
            raise InvalidSpec("emotion_means must cover exactly the emotions")
        if set(self.variances) != set(self.emotions):
            raise InvalidSpec("variances must cover exactly the emotions")
        outside = np.ones(width, dtype=bool)
        outside[list(self.informative_features)] = False
        for emotion in self.emotions:
            mean = np.asarray(self.emotion_means[emotion], dtype=np.float64)
            var = np.asarray(self.variances[emotion], dtype=np.float64)
            if mean.shape != (width,) or var.shape != (width,):
                raise InvalidSpec(
                    f"vectors for {self.subject_id!r}/{emotion!r} must have "
                    f"width {width}"
                )
            if not np.isfinite(mean).all():
                raise InvalidSpec("emotion mean contains non-finite values")
            if not np.isfinite(var).all() or (var <= 0).any():
                raise InvalidSpec("variances must be positive and finite")
            if self.separation > 0 and np.any(mean[outside] != 0.0):
                raise InvalidSpec(
                    f"direction for {self.subject_id!r}/{emotion!r} has mass "
                    "outside the informative subset"
                )


@dataclass(frozen=True)
class CohortSpec:
    """A full synthetic cohort: subject profiles plus the shared backbone."""

    subjects: tuple[SubjectProfile, ...]
    backbone: dict[str, np.ndarray]
    backbone_weight: float
    seed: int

    def validate(self, width: int) -> None:
        if not self.subjects:
            raise InvalidSpec("cohort has no subjects")
        ids = [s.subject_id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("duplicate subject ids in cohort")
        if not (0.0 <= self.backbone_weight <= 1.0):
            raise InvalidSpec("backbone_weight must lie in [0, 1]")
        used = {e for s in self.subjects for e in s.emotions}
        missing = used - set(self.backbone)
        if missing:
            raise InvalidSpec(f"backbone missing emotions {sorted(missing)}")
        for emotion, vec in self.backbone.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (width,) or not np.isfinite(vec).all():
                raise InvalidSpec(f"backbone vector for {emotion!r} is malformed")
        for profile in self.subjects:
            profile.validate(width)


def class_mean(spec: CohortSpec, profile: SubjectProfile, emotion: str) -> np.ndarray:
    """The sampling mean for one (subject, emotion) at stream start.

    With zero drift this is the mean of every frame; with positive drift the
    mean moves from here toward ``separation * backbone[emotion]``.
    """
    w = spec.backbone_weight
    backbone = np.asarray(spec.backbone[emotion], dtype=np.float64)
    own = np.asarray(profile.emotion_means[emotion], dtype=np.float64)
    return profile.separation * (w * backbone + (1.0 - w) * own)


def generate(spec: CohortSpec, schema: FeatureSchema | None = None) -> list[SubjectDataset]:
    """Sample the cohort; byte-identical output for identical spec bytes.

    One clip per emotion, frames indexed 0..n-1 in emission order.  Per
    subject the stream is seeded by (spec.seed, "subject", subject_id), with
    each emotion's noise block drawn in profile order.
    """
    schema = schema if schema is not None else default_schema()
    width = schema.n_features
    spec.validate(width)

    datasets = []
    for profile in spec.subjects:
        rng = rng_from(spec.seed, "subject", profile.subject_id)

        features, labels, clips, frames = [], [], [], []
        for emotion in profile.emotions:
            n = profile.frames_per_emotion
            start = class_mean(spec, profile, emotion)
            target = profile.separation * np.asarray(
                spec.backbone[emotion], dtype=np.float64
            )
            sigma = np.sqrt(np.asarray(profile.variances[emotion], dtype=np.float64))
            c = np.clip(profile.drift_rate * np.arange(n, dtype=np.float64), 0.0, 1.0)
            block = (
                start[None, :]
                + c[:, None] * (target - start)[None, :]
                + sigma[None, :] * rng.standard_normal((n, width))
            )
            features.append(block)
            labels.append(np.full(n, emotion, dtype=object))
            clips.append(np.full(n, f"clip-{emotion}", dtype=object))
            frames.append(np.arange(n, dtype=np.int64))

        features = np.concatenate(features)
        labels = np.concatenate(labels)
        clips = np.concatenate(clips)
        frames = np.concatenate(frames)
        order = np.lexsort((frames, clips.astype(str)))
        datasets.append(
            SubjectDataset(
                subject_id=profile.subject_id,
                features=features[order],
                labels=labels[order],
                clip_ids=clips[order],
                frame_indices=frames[order],
                feature_names=schema.feature_names,
                schema_hash=schema.hash(),
            )
        )
    return datasets


_N_SUBJECTS = 10
_LOW_SEP_POSITIONS = (8, 9)  # last two subjects are the planted low-separability pair
_N_BACKBONE_DIMS = 10
_N_OWN_DIMS = 8
_HIGH_SEPARATION = 6.0
_LOW_SEPARATION = 1.5
_LOW_DRIFT_RATE = 1.0 / 1400.0
_DRIFTER_EMOTIONS = ("neutral", "surprise")
_FRAMES_PER_EMOTION = 1700
_BACKBONE_WEIGHT = 0.2


def benchmark_cohort(seed: int) -> CohortSpec:
    """The standard ten-subject fixture.

    Eight subjects carry strong stable class structure on their own feature
    subsets.  The last two are the planted failure regime: weak separation
    on the shared backbone dimensions, starting from another emotion's
    pattern and drifting to the correct one within the session, so their
    own data never shows stable class clusters.  Emotion sets rotate so
    every emotion is covered by at least two subjects; per-class frame
    counts exceed the default curation target so subsampling engages.
    """
    rng = rng_from(seed, "cohort")
    width = 51
    backbone_dims = np.sort(rng.choice(width, size=_N_BACKBONE_DIMS, replace=False))
    other_dims = np.setdiff1d(np.arange(width), backbone_dims)

    backbone = {}
    for emotion in ACTUAL_EMOTIONS:
        vec = np.zeros(width)
        vec[backbone_dims] = rng.standard_normal(_N_BACKBONE_DIMS)
        vec /= np.linalg.norm(vec)
        backbone[emotion] = vec

    subjects = []
    for i in range(_N_SUBJECTS):
        sid = f"S{i + 1:02d}"
        low = i in _LOW_SEP_POSITIONS
        if low:
            # Both drifters share one emotion pair: the pattern swap pits
            # each class against the other's cohort-typical position, and
            # each drifter's frames cover the other's late-session geometry
            # in pooled training data.
            emotions = _DRIFTER_EMOTIONS
        else:
            count = 3 if i % 2 == 0 else 2
            emotions = tuple(
                ACTUAL_EMOTIONS[(i + j) % len(ACTUAL_EMOTIONS)] for j in range(count)
            )
        if low:
            informative = tuple(int(d) for d in backbone_dims)
            # Start out expressing each emotion with the next emotion's
            # cohort-typical pattern; drift converges to the correct one.
            means = {
                e: backbone[emotions[(j + 1) % len(emotions)]].copy()
                for j, e in enumerate(emotions)
            }
            separation = _LOW_SEPARATION
            drift = _LOW_DRIFT_RATE
        else:
            own = np.sort(rng.choice(other_dims, size=_N_OWN_DIMS, replace=False))
            informative = tuple(int(d) for d in own)
            means = {}
            for e in emotions:
                vec = np.zeros(width)
                vec[own] = rng.standard_normal(_N_OWN_DIMS)
                vec /= np.linalg.norm(vec)
                means[e] = vec
            separation = _HIGH_SEPARATION
            drift = 0.0
        subjects.append(
            SubjectProfile(
                subject_id=sid,
                emotions=emotions,
                emotion_means=means,
                variances={e: np.ones(width) for e in emotions},
                separation=separation,
                informative_features=informative,
                frames_per_emotion=_FRAMES_PER_EMOTION,
                drift_rate=drift,
            )
        )
    return CohortSpec(
        subjects=tuple(subjects),
        backbone=backbone,
        backbone_weight=_BACKBONE_WEIGHT,
        seed=seed,
    )


def low_separability_subjects() -> tuple[str, ...]:
    """Subject ids of the planted low-separability pair in benchmark cohorts."""
    return tuple(f"S{i + 1:02d}" for i in _LOW_SEP_POSITIONS)


def cohort_to_table(
    datasets: list[SubjectDataset], schema: FeatureSchema | None = None
) -> pd.DataFrame:
    """Expand generated feature vectors into the raw frame-CSV layout.

    Every source column of a descriptor receives the descriptor's value, so
    aggregation recovers the generated features (up to float rounding of the
    multi-column means).
    """
    schema = schema if schema is not None else default_schema()
    rows_per_subject = []
    for ds in datasets:
        if ds.schema_hash != schema.hash():
            raise InvalidSpec(
                f"dataset {ds.subject_id!r} was generated under a different schema"
            )
        n = ds.n_frames
        data = {
            "subject": np.full(n, ds.subject_id, dtype=object),
            "clip": ds.clip_ids,
            "frame": ds.frame_indices,
            "prompt": np.asarray(
                [PROMPT_FOR_ACTUAL[l] for l in ds.labels], dtype=object
            ),
            "actual": ds.labels,
        }
        for j, descriptor in enumerate(schema.descriptors):
            for col in descriptor.source_columns:
                data[col] = ds.features[:, j]
        rows_per_subject.append(pd.DataFrame(data))
    return pd.concat(rows_per_subject, ignore_index=True)


def spec_to_dict(spec: CohortSpec) -> dict:
    return {
        "seed": int(spec.seed),
        "backbone_weight": float(spec.backbone_weight),
        "backbone": {e: v.tolist() for e, v in sorted(spec.backbone.items())},
        "subjects": [
            {
                "subject_id": p.subject_id,
                "emotions": list(p.emotions),
                "emotion_means": {
                    e: np.asarray(p.emotion_means[e]).tolist() for e in p.emotions
                },
                "variances": {
                    e: np.asarray(p.variances[e]).tolist() for e in p.emotions
                },
                "separation": float(p.separation),
                "informative_features": list(p.informative_features),
                "frames_per_emotion": int(p.frames_per_emotion),
                "drift_rate": float(p.drift_rate),
            }
            for p in spec.subjects
        ],
    }


def spec_from_dict(payload: dict) -> CohortSpec:
    try:
        subjects = tuple(
            SubjectProfile(
                subject_id=row["subject_id"],
                emotions=tuple(row["emotions"]),
                emotion_means={
                    e: np.asarray(v, dtype=np.float64)
                    for e, v in row["emotion_means"].items()
                },
                variances={
                    e: np.asarray(v, dtype=np.float64)
                    for e, v in row["variances"].items()
                },
                separation=float(row["separation"]),
                informative_features=tuple(row["informative_features"]),
                frames_per_emotion=int(row["frames_per_emotion"]),
                drift_rate=float(row.get("drift_rate", 0.0)),
            )
            for row in payload["subjects"]
        )
        return CohortSpec(
            subjects=subjects,
            backbone={
                e: np.asarray(v, dtype=np.float64)
                for e, v in payload["backbone"].items()
            },
            backbone_weight=float(payload["backbone_weight"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError) as err:
        raise InvalidSpec(f"malformed cohort spec: {err}")


def spec_to_json(spec: CohortSpec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True, indent=2)


def spec_from_json(text: str) -> CohortSpec:
    return spec_from_dict(json.loads(text))
