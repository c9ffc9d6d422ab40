"""Classifier families, hyperparameter grids, and model serialization.

Three families share one contract: ``fit(X, y)``, ``predict_proba`` (one
non-negative score per class, rows summing to 1) and ``predict`` (argmax,
ties to the lowest class index).  ``default_grid`` is the search space used
by cross-validated selection; configurations enumerate in documented order
(itertools product over parameters in listed order), which is what "first in
grid order" tie-breaking refers to.
"""

from __future__ import annotations

import itertools
import json

from ..errors import ConfigError
from .forest import ForestClassifier
from .knn import KnnClassifier
from .mlp import MlpClassifier

FAMILIES = ("knn", "random_forest", "mlp")

MODEL_FORMAT_VERSION = 1

_CLASSES = {
    "knn": KnnClassifier,
    "random_forest": ForestClassifier,
    "mlp": MlpClassifier,
}

_SEEDED = {"random_forest", "mlp"}


def default_grid() -> dict[str, dict[str, list]]:
    """Stable family -> parameter -> candidate-values mapping."""
    return {
        "knn": {"k": [1, 3, 5, 11, 21]},
        "random_forest": {"n_trees": [50, 100, 200], "max_depth": [8, 16, None]},
        "mlp": {"hidden_units": [32, 64, 128], "learning_rate": [0.01, 0.001]},
    }


def enumerate_configs(family_grid: dict[str, list]) -> list[dict]:
    """All configurations of one family's grid, in documented order."""
    if not family_grid:
        raise ConfigError("hyperparameter grid for a family must be non-empty")
    names = list(family_grid.keys())
    values = [family_grid[name] for name in names]
    for name, vals in zip(names, values):
        if not isinstance(vals, (list, tuple)) or len(vals) == 0:
            raise ConfigError(f"grid entry {name!r} must be a non-empty list")
    return [dict(zip(names, combo)) for combo in itertools.product(*values)]


def make_classifier(family: str, config: dict, seed: int = 0):
    """Instantiate an unfitted classifier of ``family`` with ``config``."""
    if family not in _CLASSES:
        raise ConfigError(f"unknown classifier family {family!r}")
    kwargs = dict(config)
    if family in _SEEDED:
        kwargs.setdefault("seed", seed)
    try:
        return _CLASSES[family](**kwargs)
    except TypeError as err:
        raise ConfigError(f"bad configuration for family {family!r}: {err}")


def model_to_json(model) -> str:
    """Versioned JSON form of a fitted classifier."""
    for family, cls in _CLASSES.items():
        if isinstance(model, cls):
            payload = {
                "format_version": MODEL_FORMAT_VERSION,
                "family": family,
                "model": model.to_dict(),
            }
            return json.dumps(payload, sort_keys=True, indent=2)
    raise ConfigError(f"cannot serialize object of type {type(model).__name__}")


def model_from_json(text: str):
    payload = json.loads(text)
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {version!r}")
    family = payload.get("family")
    if family not in _CLASSES:
        raise ConfigError(f"unknown classifier family {family!r}")
    return _CLASSES[family].from_dict(payload["model"])


__all__ = [
    "FAMILIES",
    "MODEL_FORMAT_VERSION",
    "KnnClassifier",
    "ForestClassifier",
    "MlpClassifier",
    "default_grid",
    "enumerate_configs",
    "make_classifier",
    "model_to_json",
    "model_from_json",
]
