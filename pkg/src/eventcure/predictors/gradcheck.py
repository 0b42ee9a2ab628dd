"""Central finite-difference gradient checking for parameter dictionaries."""

import numpy as np


def numerical_gradient(loss_fn, params, eps=1e-4):
    """Central differences of ``loss_fn(params)`` for every parameter entry.

    ``params`` is perturbed in place and restored afterwards.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p, dtype=np.float64)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = loss_fn(params)
            flat[i] = old - eps
            down = loss_fn(params)
            flat[i] = old
            gflat[i] = (up - down) / (2 * eps)
        grads[name] = g
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    """``|a - n| / max(|a|, |n|)`` over a whole array.

    The denominator is floored so that parameters whose true gradient is
    exactly zero are compared absolutely instead of amplifying round-off.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)


def max_relative_error(analytic, numeric):
    return max(relative_error(analytic[k], numeric[k]) for k in analytic)
