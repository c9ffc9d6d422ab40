"""Single-hidden-layer neural network classifier.

ReLU hidden layer, softmax output, mean cross-entropy loss, mini-batch
gradient descent with classical momentum.  Weights start from a seeded
uniform distribution scaled by fan-in; the per-epoch shuffle comes from the
same seeded stream, so training is a pure function of (data, params, seed).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import ConfigError, NonFiniteLoss
from ..seeding import rng_from
from .base import ScoredClassifierMixin, check_features, check_training, encode_labels


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: dict, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden activations and class probabilities."""
    hidden = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    probs = softmax(hidden @ params["W2"] + params["b2"])
    return hidden, probs


def loss_and_grads(
    params: dict, X: np.ndarray, codes: np.ndarray, n_classes: int
) -> tuple[float, dict]:
    """Mean cross-entropy over the batch and its exact gradients.

    ReLU uses the zero subgradient at exactly zero pre-activation.
    """
    n = len(X)
    hidden, probs = forward(params, X)
    # a vanished true-class probability yields inf here; fit() checks for it
    with np.errstate(divide="ignore"):
        loss = float(-np.log(probs[np.arange(n), codes]).mean())

    delta_out = probs.copy()
    delta_out[np.arange(n), codes] -= 1.0
    delta_out /= n
    grad_W2 = hidden.T @ delta_out
    grad_b2 = delta_out.sum(axis=0)
    delta_hidden = delta_out @ params["W2"].T
    delta_hidden[hidden <= 0.0] = 0.0
    grad_W1 = X.T @ delta_hidden
    grad_b1 = delta_hidden.sum(axis=0)
    return loss, {"W1": grad_W1, "b1": grad_b1, "W2": grad_W2, "b2": grad_b2}


def init_params(
    n_features: int, hidden_units: int, n_classes: int, rng: np.random.Generator
) -> dict:
    """Symmetric uniform init scaled by 1/sqrt(fan_in); zero biases."""
    lim1 = 1.0 / np.sqrt(n_features)
    lim2 = 1.0 / np.sqrt(hidden_units)
    return {
        "W1": rng.uniform(-lim1, lim1, size=(n_features, hidden_units)),
        "b1": np.zeros(hidden_units),
        "W2": rng.uniform(-lim2, lim2, size=(hidden_units, n_classes)),
        "b2": np.zeros(n_classes),
    }


class MlpClassifier(ScoredClassifierMixin, ClassifierMixin, BaseEstimator):
    def __init__(
        self,
        hidden_units: int = 64,
        learning_rate: float = 0.01,
        epochs: int = 150,
        batch_size: int = 32,
        momentum: float = 0.9,
        seed: int = 0,
    ):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.seed = seed

    def fit(self, X, y):
        if self.hidden_units < 1:
            raise ConfigError("hidden_units must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must lie in [0, 1)")
        X, y = check_training(X, y)
        self.classes_, codes = encode_labels(y)
        n_classes = len(self.classes_)
        n = len(X)

        rng = rng_from(self.seed, "mlp")
        params = init_params(X.shape[1], self.hidden_units, n_classes, rng)
        velocity = {k: np.zeros_like(v) for k, v in params.items()}

        history = []
        for epoch in range(self.epochs):
            perm = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, self.batch_size):
                take = perm[start : start + self.batch_size]
                loss, grads = loss_and_grads(params, X[take], codes[take], n_classes)
                epoch_loss += loss * len(take)
                for key in params:
                    velocity[key] = (
                        self.momentum * velocity[key] - self.learning_rate * grads[key]
                    )
                    params[key] = params[key] + velocity[key]
            epoch_loss /= n
            if not np.isfinite(epoch_loss):
                raise NonFiniteLoss(epoch)
            history.append(epoch_loss)

        self.params_ = params
        self.loss_history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = check_features(X)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(
                f"query width {X.shape[1]} != training width {self.n_features_in_}"
            )
        _, probs = forward(self.params_, X)
        return probs

    def to_dict(self) -> dict:
        return {
            "params": {
                "hidden_units": int(self.hidden_units),
                "learning_rate": float(self.learning_rate),
                "epochs": int(self.epochs),
                "batch_size": int(self.batch_size),
                "momentum": float(self.momentum),
                "seed": int(self.seed),
            },
            "classes": self.classes_.tolist(),
            "weights": {k: v.tolist() for k, v in self.params_.items()},
            "loss_history": [float(x) for x in self.loss_history_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpClassifier":
        est = cls(**payload["params"])
        est.classes_ = np.asarray(payload["classes"], dtype=object).astype(str)
        est.params_ = {
            k: np.asarray(v, dtype=np.float64) for k, v in payload["weights"].items()
        }
        est.loss_history_ = list(payload["loss_history"])
        est.n_features_in_ = est.params_["W1"].shape[0]
        return est
