"""Event-conditioned image importance (the W matrix producer).

A siamese scorer: a shared tanh trunk feeds one linear scoring head per
event type. During training a second pathway maps the difference of the two
trunk outputs straight to a score difference, and the predicted difference
is the mean of the twin-head difference and that direct estimate. Only the
head and pathway column of the event sampled for the pair (plus the trunk)
receive gradient. At prediction time only the heads are used.
"""

from dataclasses import dataclass, field

import numpy as np

from ..dataset import DatasetManifest, sample_label
from ..errors import DimensionMismatch, EmptySplit, InvalidMargins, MissingGroundTruth
from ._nn import as_features, glorot, sgd_step
from .config import TrainConfig


def piecewise_ranking_loss(D, G, m_s=0.1, m_d=0.3):
    """Pairwise loss on a predicted score difference ``D`` given the true
    difference ``G``; returns ``(loss, dloss/dD)``.

    Pairs with ``|G| <= m_s`` count as similar and are pushed into
    ``[-m_s, m_s]``; otherwise ``D`` must clear ``m_d`` in the direction of
    ``G``. Works element-wise on arrays.
    """
    if not 0 <= m_s < m_d:
        raise InvalidMargins(f"need 0 <= m_s < m_d, got m_s={m_s}, m_d={m_d}")
    D = np.asarray(D, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    D, G = np.broadcast_arrays(D, G)

    over = np.maximum(0.0, D - m_s)
    under = np.maximum(0.0, -D - m_s)
    short_pos = np.maximum(0.0, m_d - D)
    short_neg = np.maximum(0.0, m_d + D)

    similar = np.abs(G) <= m_s
    pos = ~similar & (G > 0)
    neg = ~similar & (G < 0)
    loss = np.where(similar, 0.5 * (over**2 + under**2), 0.0)
    loss = np.where(pos, 0.5 * short_pos**2, loss)
    loss = np.where(neg, 0.5 * short_neg**2, loss)
    grad = np.where(similar, over - under, 0.0)
    grad = np.where(pos, -short_pos, grad)
    grad = np.where(neg, short_neg, grad)
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


@dataclass(frozen=True, eq=False)
class ImportanceModel:
    params: dict
    loss_history: tuple = field(default=())

    @property
    def input_dim(self) -> int:
        return self.params["Wt"].shape[0]

    @property
    def hidden(self) -> int:
        return self.params["Wt"].shape[1]

    @property
    def n_classes(self) -> int:
        return self.params["Wc"].shape[1]


def init_importance_params(input_dim, n_classes, hidden, rng):
    # Head and pathway columns get identical updates, so whatever difference
    # they start with survives training and leaks into the test-time head.
    # Starting both at zero keeps them tied; the random trunk breaks symmetry.
    return {
        "Wt": glorot(rng, input_dim, hidden),
        "bt": np.zeros(hidden),
        "Wc": np.zeros((hidden, n_classes)),
        "bc": np.zeros(n_classes),
        "Wp": np.zeros((hidden, n_classes)),
    }


def _trunk(params, X):
    return np.tanh(X @ params["Wt"] + params["bt"])


def head_scores(params, X):
    """Raw per-event scores, N x C."""
    return _trunk(params, X) @ params["Wc"] + params["bc"]


def pair_difference(params, Xi, Xj, events):
    """Training-time predicted difference for each pair under its event."""
    zi, zj = _trunk(params, Xi), _trunk(params, Xj)
    rows = np.arange(len(events))
    twin = (zi @ params["Wc"] + params["bc"])[rows, events] - (zj @ params["Wc"] + params["bc"])[rows, events]
    direct = ((zi - zj) @ params["Wp"])[rows, events]
    return 0.5 * (twin + direct)


def importance_loss_and_grad(params, Xi, Xj, G, events, m_s, m_d):
    """Mean piecewise ranking loss over a batch of pairs, gated by event."""
    n = len(events)
    ai = Xi @ params["Wt"] + params["bt"]
    aj = Xj @ params["Wt"] + params["bt"]
    zi, zj = np.tanh(ai), np.tanh(aj)
    dz = zi - zj
    # column of head and pathway selected per pair, h x n
    wc = params["Wc"][:, events]
    wp = params["Wp"][:, events]
    D = 0.5 * np.einsum("nh,hn->n", dz, wc + wp)
    loss, dD = piecewise_ranking_loss(D, G, m_s, m_d)
    dD = dD / n

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    col = 0.5 * dz * dD[:, None]
    np.add.at(grads["Wc"].T, events, col)
    np.add.at(grads["Wp"].T, events, col)
    ddz = 0.5 * dD[:, None] * (wc + wp).T
    dai = ddz * (1.0 - zi**2)
    daj = -ddz * (1.0 - zj**2)
    grads["Wt"] = Xi.T @ dai + Xj.T @ daj
    grads["bt"] = dai.sum(axis=0) + daj.sum(axis=0)
    return float(np.mean(loss)), grads


def _sample_pairs(albums, feats, pairs_per_album, rng):
    Xi, Xj, G, events = [], [], [], []
    for a, X in zip(albums, feats):
        n = len(a)
        if n < 2:
            continue
        i = rng.integers(0, n, size=pairs_per_album)
        j = (i + rng.integers(1, n, size=pairs_per_album)) % n
        Xi.append(X[i])
        Xj.append(X[j])
        G.append(a.gt_importance[i] - a.gt_importance[j])
        events.extend(sample_label(a.label_dist, rng) for _ in range(pairs_per_album))
    if not Xi:
        raise EmptySplit("no training album has two or more images")
    return np.concatenate(Xi), np.concatenate(Xj), np.concatenate(G), np.array(events)


def train_importance(
    manifest: DatasetManifest, cfg: TrainConfig, pairs_per_album: int = 16
) -> ImportanceModel:
    """Train the siamese importance scorer on pairs drawn fresh each epoch."""
    albums = manifest.split("train")
    if not albums:
        raise EmptySplit("no training albums")
    missing = [a.album_id for a in albums if a.gt_importance is None]
    if missing:
        raise MissingGroundTruth(f"{len(missing)} training albums lack importance, e.g. {missing[0]}")
    rng = np.random.default_rng([cfg.seed, 3])
    params = init_importance_params(manifest.feature_dim, manifest.n_classes, cfg.hidden or 1, rng)
    feats = [as_features(a) for a in albums]

    history = []
    for _ in range(cfg.epochs):
        Xi, Xj, G, events = _sample_pairs(albums, feats, pairs_per_album, rng)
        order = rng.permutation(len(G))
        total = 0.0
        for start in range(0, len(G), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = importance_loss_and_grad(
                params, Xi[idx], Xj[idx], G[idx], events[idx],
                cfg.margin_similar, cfg.margin_different,
            )
            sgd_step(params, grads, cfg.learning_rate)
            total += loss * idx.size
        history.append(total / len(G))
    return ImportanceModel(params, tuple(history))


def minmax_columns(S):
    """Scale each column to [0, 1]; constant columns become all ones."""
    S = np.asarray(S, dtype=np.float64)
    lo, hi = S.min(axis=0), S.max(axis=0)
    span = hi - lo
    const = span <= 1e-12 * np.maximum(1.0, np.abs(hi))
    out = (S - lo) / np.where(const, 1.0, span)
    out[:, const] = 1.0
    return out


def predict_importance(model: ImportanceModel, album) -> np.ndarray:
    """N x C importance matrix, each event column min-max scaled to [0, 1]."""
    X = as_features(album)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"expected {model.input_dim}-dim features, got shape {X.shape}")
    return minmax_columns(head_scores(model.params, X))
