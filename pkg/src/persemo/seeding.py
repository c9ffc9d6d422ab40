"""Deterministic seed derivation.

Every random draw in the package flows from one master seed through
``subseed``: the master seed plus a path of string/int tags is hashed into a
64-bit child seed.  Distinct tag paths give independent streams, and the
stream for one component never depends on what a sibling component drew.

Documented tag paths:

========================================  =========================================
component                                 path
========================================  =========================================
per-subject curation                      (policy.seed, "subsample", subject_id)
pooled generic sampling                   (policy.seed, "generic", scope, *emotions)
subject pipeline in an experiment         (master, "subject", subject_id)
personalized evaluation of one split     (subject seed, "personal", split index)
generic evaluation of one split          (subject seed, "generic", split index)
outer fold assignment (nested mode)       (split.seed, "outer", subject_id)
fold assignment inside an evaluation      (eval seed, "folds")
inner fold assignment                     (eval seed, "inner")
model fit inside inner selection          (eval seed, family, fold, config index)
final refit of a chosen config            (eval seed, family, "refit")
tree inside a forest                      (model seed, "tree", tree index)
network init and batching                 (model seed, "mlp")
cohort generation per subject             (spec.seed, "subject", subject_id)
benchmark cohort construction             (seed, "cohort")
========================================  =========================================
"""

import hashlib

import numpy as np


def subseed(master: int, *tags) -> int:
    """Derive a 64-bit child seed from ``master`` and a tag path."""
    text = ":".join([str(int(master))] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_from(master: int, *tags) -> np.random.Generator:
    """A fresh PCG64 generator seeded by ``subseed(master, *tags)``."""
    return np.random.Generator(np.random.PCG64(subseed(master, *tags)))
