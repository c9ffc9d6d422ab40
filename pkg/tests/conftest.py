"""Shared fixture builders for the test suite."""

import numpy as np

from persemo.curation import CurationPolicy, SubjectDataset

FEATURE_NAMES_4 = ("f0", "f1", "f2", "f3")


def make_dataset(
    subject_id,
    emotions=("anger", "happiness"),
    n_per_class=30,
    width=4,
    rng=None,
    centers=None,
    noise=0.5,
):
    """Gaussian-blob SubjectDataset: one clip per emotion, frames 0..n-1.

    ``centers`` maps emotion -> length-``width`` mean; defaults to spreading
    classes along the first axis so they are cleanly separable.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    emotions = sorted(emotions)
    if centers is None:
        centers = {}
        for k, emotion in enumerate(emotions):
            vec = np.zeros(width)
            vec[0] = 4.0 * k
            centers[emotion] = vec
    features, labels, clips, frames = [], [], [], []
    # clip names sort alphabetically with the emotions, keeping rows ordered
    for emotion in emotions:
        block = centers[emotion] + noise * rng.standard_normal((n_per_class, width))
        features.append(block)
        labels += [emotion] * n_per_class
        clips += [f"clip-{emotion}"] * n_per_class
        frames += list(range(n_per_class))
    names = tuple(f"f{j}" for j in range(width))
    return SubjectDataset(
        subject_id=subject_id,
        features=np.concatenate(features),
        labels=np.array(labels, dtype=object),
        clip_ids=np.array(clips, dtype=object),
        frame_indices=np.array(frames, dtype=np.int64),
        feature_names=names,
        schema_hash="test-schema",
    )


def small_policy(target=20, seed=0):
    return CurationPolicy(
        min_labels_per_emotion=target, target_per_class=target, min_emotions=2, seed=seed
    )
