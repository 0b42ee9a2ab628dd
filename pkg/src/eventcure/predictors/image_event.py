"""Per-image event classifier (the Q matrix producer).

A softmax regression, optionally with one tanh hidden layer, trained with
cross-entropy against one-hot targets that are re-sampled from each album's
label distribution every epoch.
"""

from dataclasses import dataclass, field

import numpy as np

from ..dataset import DatasetManifest, sample_label
from ..errors import DimensionMismatch, EmptySplit
from ._nn import as_features, cross_entropy, glorot, minibatches, sgd_step, softmax
from .config import TrainConfig


@dataclass(frozen=True, eq=False)
class ImageEventModel:
    params: dict
    loss_history: tuple = field(default=())

    @property
    def hidden(self) -> int:
        return self.params["W1"].shape[1] if "W1" in self.params else 0

    @property
    def input_dim(self) -> int:
        return (self.params["W1"] if self.hidden else self.params["W"]).shape[0]

    @property
    def n_classes(self) -> int:
        return (self.params["W2"] if self.hidden else self.params["W"]).shape[1]


def init_image_event_params(input_dim, n_classes, hidden, rng):
    if hidden == 0:
        return {"W": glorot(rng, input_dim, n_classes), "b": np.zeros(n_classes)}
    return {
        "W1": glorot(rng, input_dim, hidden),
        "b1": np.zeros(hidden),
        "W2": glorot(rng, hidden, n_classes),
        "b2": np.zeros(n_classes),
    }


def image_event_logits(params, X):
    if "W" in params:
        return X @ params["W"] + params["b"]
    a = np.tanh(X @ params["W1"] + params["b1"])
    return a @ params["W2"] + params["b2"]


def image_event_loss_and_grad(params, X, targets):
    """Mean cross-entropy over the rows of ``X`` and its parameter gradient."""
    if "W" in params:
        loss, dlogits = cross_entropy(X @ params["W"] + params["b"], targets)
        return loss, {"W": X.T @ dlogits, "b": dlogits.sum(axis=0)}
    a = np.tanh(X @ params["W1"] + params["b1"])
    loss, dlogits = cross_entropy(a @ params["W2"] + params["b2"], targets)
    da = (dlogits @ params["W2"].T) * (1.0 - a**2)
    return loss, {
        "W1": X.T @ da,
        "b1": da.sum(axis=0),
        "W2": a.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }


def train_image_event(manifest: DatasetManifest, cfg: TrainConfig) -> ImageEventModel:
    albums = manifest.split("train")
    if not albums:
        raise EmptySplit("no training albums")
    rng = np.random.default_rng([cfg.seed, 1])
    X = np.concatenate([as_features(a) for a in albums])
    owner = np.concatenate([np.full(len(a), k) for k, a in enumerate(albums)])
    params = init_image_event_params(manifest.feature_dim, manifest.n_classes, cfg.hidden, rng)

    history = []
    targets = np.empty(X.shape[0], dtype=np.intp)
    for _ in range(cfg.epochs):
        for i, k in enumerate(owner):
            targets[i] = sample_label(albums[k].label_dist, rng)
        total = 0.0
        for idx in minibatches(X.shape[0], cfg.batch_size, rng):
            loss, grads = image_event_loss_and_grad(params, X[idx], targets[idx])
            sgd_step(params, grads, cfg.learning_rate)
            total += loss * idx.size
        history.append(total / X.shape[0])
    return ImageEventModel(params, tuple(history))


def predict_image_events(model: ImageEventModel, album) -> np.ndarray:
    """N x C matrix of per-image event distributions."""
    X = as_features(album)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"expected {model.input_dim}-dim features, got shape {X.shape}")
    return softmax(image_event_logits(model.params, X), axis=1)
