"""Album-level event recognizer: LSTM over the image sequence, mean pooling
of the hidden states, softmax.

Gate pre-activations are packed as ``[input, forget, output, candidate]``
along the last axis of ``Wx`` (d x 4h), ``Wh`` (h x 4h) and ``b`` (4h).
Albums are processed in padded batches; padding sits after the last image
and is masked out of both the recurrence and the pooling.
"""

from dataclasses import dataclass, field

import numpy as np

from ..dataset import DatasetManifest, sample_label
from ..errors import DimensionMismatch, EmptyAlbum, EmptySplit
from ._nn import as_features, cross_entropy, minibatches, sgd_step, sigmoid, softmax
from .config import TrainConfig

INIT_SCALE = 0.08
FORGET_BIAS = 1.0


@dataclass(frozen=True, eq=False)
class SequenceEventModel:
    params: dict
    loss_history: tuple = field(default=())

    @property
    def hidden(self) -> int:
        return self.params["Wh"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.params["Wx"].shape[0]

    @property
    def n_classes(self) -> int:
        return self.params["Wy"].shape[1]


def init_sequence_params(input_dim, n_classes, hidden, rng):
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    b = u(4 * hidden)
    b[hidden : 2 * hidden] = FORGET_BIAS
    return {
        "Wx": u(input_dim, 4 * hidden),
        "Wh": u(hidden, 4 * hidden),
        "b": b,
        "Wy": u(hidden, n_classes),
        "by": u(n_classes),
    }


def _cell_forward(params, x, h, c):
    H = params["Wh"].shape[0]
    z = x @ params["Wx"] + h @ params["Wh"] + params["b"]
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H : 2 * H])
    o = sigmoid(z[..., 2 * H : 3 * H])
    g = np.tanh(z[..., 3 * H :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, o, g, tc)


def _cell_backward(params, dh_new, dc_new, cache):
    """Backprop through one cell. Returns (param grads, dx, dh, dc)."""
    x, h, c, i, f, o, g, tc = cache
    dc_new = dc_new + dh_new * o * (1.0 - tc**2)
    dz = np.concatenate(
        [
            dc_new * g * i * (1.0 - i),
            dc_new * c * f * (1.0 - f),
            dh_new * tc * o * (1.0 - o),
            dc_new * i * (1.0 - g**2),
        ],
        axis=-1,
    )
    x2, h2, dz2 = np.atleast_2d(x), np.atleast_2d(h), np.atleast_2d(dz)
    grads = {"Wx": x2.T @ dz2, "Wh": h2.T @ dz2, "b": dz2.sum(axis=0)}
    return grads, dz @ params["Wx"].T, dz @ params["Wh"].T, dc_new * f


def lstm_step(model, x, h, c):
    """One LSTM update; returns ``(h', c')``."""
    params = getattr(model, "params", model)
    h_new, c_new, _ = _cell_forward(params, np.asarray(x, float), np.asarray(h, float), np.asarray(c, float))
    return h_new, c_new


def lstm_step_grad(model, x, h, c, dh_out, dc_out):
    """Parameter gradients of ``<dh_out, h'> + <dc_out, c'>`` after one step."""
    params = getattr(model, "params", model)
    _, _, cache = _cell_forward(params, np.asarray(x, float), np.asarray(h, float), np.asarray(c, float))
    grads, _, _, _ = _cell_backward(params, np.asarray(dh_out, float), np.asarray(dc_out, float), cache)
    return grads


def pad_albums(feature_list):
    """Stack variable-length albums into (B, T, d) with a (B, T) validity mask."""
    lengths = np.array([f.shape[0] for f in feature_list])
    B, T, d = len(feature_list), int(lengths.max()), feature_list[0].shape[1]
    X = np.zeros((B, T, d))
    for k, f in enumerate(feature_list):
        X[k, : f.shape[0]] = f
    mask = np.arange(T)[None, :] < lengths[:, None]
    return X, mask


def _forward(params, X, mask):
    B, T, _ = X.shape
    H = params["Wh"].shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    pooled = np.zeros((B, H))
    caches = []
    for t in range(T):
        m = mask[:, t : t + 1]
        h_new, c_new, cache = _cell_forward(params, X[:, t], h, c)
        h = np.where(m, h_new, h)
        c = np.where(m, c_new, c)
        pooled += m * h
        caches.append(cache)
    lengths = mask.sum(axis=1, keepdims=True)
    pooled /= lengths
    return pooled @ params["Wy"] + params["by"], pooled, caches, lengths


def sequence_logits(params, X, mask):
    return _forward(params, X, mask)[0]


def sequence_loss_and_grad(params, X, mask, targets):
    """Mean cross-entropy over a padded batch of albums, with BPTT gradients."""
    logits, pooled, caches, lengths = _forward(params, X, mask)
    loss, dlogits = cross_entropy(logits, targets)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["Wy"] = pooled.T @ dlogits
    grads["by"] = dlogits.sum(axis=0)
    dpool = (dlogits @ params["Wy"].T) / lengths

    B, T, _ = X.shape
    H = params["Wh"].shape[0]
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in reversed(range(T)):
        m = mask[:, t : t + 1]
        dh = dh + m * dpool
        step, _, dh_prev, dc_prev = _cell_backward(params, m * dh, m * dc, caches[t])
        for k in ("Wx", "Wh", "b"):
            grads[k] += step[k]
        dh = np.where(m, dh_prev, dh)
        dc = np.where(m, dc_prev, dc)
    return loss, grads


def train_sequence_event(manifest: DatasetManifest, cfg: TrainConfig) -> SequenceEventModel:
    """Train on albums whose targets are re-sampled every epoch."""
    albums = manifest.split("train")
    if not albums:
        raise EmptySplit("no training albums")
    rng = np.random.default_rng([cfg.seed, 2])
    params = init_sequence_params(manifest.feature_dim, manifest.n_classes, cfg.hidden, rng)
    feats = [as_features(a) for a in albums]

    history = []
    for _ in range(cfg.epochs):
        targets = np.array([sample_label(a.label_dist, rng) for a in albums])
        total = 0.0
        for idx in minibatches(len(albums), cfg.batch_size, rng):
            X, mask = pad_albums([feats[k] for k in idx])
            loss, grads = sequence_loss_and_grad(params, X, mask, targets[idx])
            sgd_step(params, grads, cfg.learning_rate)
            total += loss * idx.size
        history.append(total / len(albums))
    return SequenceEventModel(params, tuple(history))


def predict_sequence_event(model: SequenceEventModel, album) -> np.ndarray:
    """Length-C event distribution for one album."""
    X = as_features(album)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyAlbum("album has no images")
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"expected {model.input_dim}-dim features, got {X.shape[1]}")
    mask = np.ones((1, X.shape[0]), dtype=bool)
    return softmax(sequence_logits(model.params, X[None], mask)[0])
