"""Small numpy building blocks shared by the reference predictors."""

import numpy as np


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits, targets):
    """Mean cross-entropy of integer ``targets`` and its gradient w.r.t. logits."""
    n = logits.shape[0]
    z = logits - np.max(logits, axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, targets]))
    grad = softmax(logits, axis=1)
    grad[rows, targets] -= 1.0
    return loss, grad / n


def glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def sgd_step(params, grads, lr):
    for k, g in grads.items():
        params[k] -= lr * g


def as_features(album):
    """Accept an AlbumRecord or a raw N x d array."""
    feats = getattr(album, "features", album)
    return np.asarray(feats, dtype=np.float64)
