"""Iterative joint estimation of an album's event distribution ``p`` and its
per-image importance ``v``.

Each round re-weights the per-image event predictions ``Q`` by the current
importance (raised to ``alpha``), averages the result with the sequence
model's anchor ``p_hat``, then recomputes importance as the ``p``-weighted
mix of the event-conditioned scores ``W`` after masking out events whose
probability is below ``m`` times the most likely one.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AllZeroImportance, ConfigError, DimensionMismatch, EmptyGrid

DEFAULT_ALPHA_GRID = (0.5, 1.0, 2.0, 4.0)
DEFAULT_MASK_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def _check_distribution(p, name):
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{name} is not a probability distribution")


@dataclass(frozen=True, eq=False)
class FusionInputs:
    Q: np.ndarray
    W: np.ndarray
    p_hat: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        W = np.asarray(self.W, dtype=np.float64)
        p_hat = np.asarray(self.p_hat, dtype=np.float64)
        if Q.ndim != 2 or W.shape != Q.shape or p_hat.shape != (Q.shape[1],):
            raise DimensionMismatch(
                f"shapes disagree: Q {Q.shape}, W {W.shape}, p_hat {p_hat.shape}"
            )
        if Q.shape[0] < 1:
            raise DimensionMismatch("album has no images")
        if np.any(Q < 0) or np.any(np.abs(Q.sum(axis=1) - 1.0) > 1e-9):
            raise ConfigError("rows of Q must be probability distributions")
        if np.any(W < 0) or np.any(W > 1):
            raise ConfigError("entries of W must lie in [0, 1]")
        _check_distribution(p_hat, "p_hat")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "p_hat", p_hat)

    @property
    def n_images(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 1.0
    mask_fraction: float = 0.0
    max_iters: int = 10
    tol: float = 1e-4
    # False drops the anchor-averaging step (the image-only variant)
    use_anchor: bool = True

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ConfigError("alpha must be >= 0")
        if not 0 <= self.mask_fraction <= 1:
            raise ConfigError("mask_fraction must be in [0, 1]")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")


@dataclass(frozen=True, eq=False)
class FusionResult:
    p: np.ndarray
    v: np.ndarray
    steps: int
    converged: bool
    album_id: str = ""

    def to_dict(self):
        return {
            "album_id": self.album_id,
            "p": self.p.tolist(),
            "v": self.v.tolist(),
            "steps": self.steps,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["p"], dtype=np.float64),
            np.asarray(d["v"], dtype=np.float64),
            int(d["steps"]),
            bool(d["converged"]),
            str(d.get("album_id", "")),
        )


def reweight_event(v, Q, alpha) -> np.ndarray:
    """Importance-weighted average of the rows of ``Q``."""
    v = np.asarray(v, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if v.shape != (Q.shape[0],):
        raise DimensionMismatch(f"v has shape {v.shape}, Q has {Q.shape[0]} rows")
    # numpy defines 0 ** 0 == 1, so alpha == 0 ignores importance entirely
    w = np.power(v, alpha)
    if not np.any(w > 0):
        raise AllZeroImportance("every image has zero weight")
    p = w @ Q
    return p / p.sum()


def combine_with_anchor(p_prime, p_hat) -> np.ndarray:
    return 0.5 * (np.asarray(p_prime, dtype=np.float64) + np.asarray(p_hat, dtype=np.float64))


def event_mask(p, m) -> np.ndarray:
    """Boolean mask of events kept at mask fraction ``m``."""
    p = np.asarray(p, dtype=np.float64)
    return p >= m * p.max()


def minmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    span = hi - lo
    if span <= 1e-12 * max(1.0, abs(hi)):
        return np.ones_like(x)
    return (x - lo) / span


def update_importance(W, p, m, return_raw=False):
    """Per-image importance from event-conditioned scores, rescaled to [0, 1]."""
    W = np.asarray(W, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if W.shape[1] != p.size:
        raise DimensionMismatch(f"W has {W.shape[1]} columns, p has {p.size} entries")
    raw = (W * event_mask(p, m)) @ p
    v = minmax(raw)
    return (v, raw) if return_raw else v


def iterate(inputs: FusionInputs, cfg: FusionConfig = FusionConfig()) -> FusionResult:
    """Alternate event and importance updates until both stop moving.

    Convergence is declared when the largest absolute change in ``p`` and in
    ``v`` drops below ``cfg.tol``. The reference ``p`` before the first round
    is ``p_hat``. If ``max_iters`` rounds pass without convergence the last
    three iterates are averaged.
    """
    Q, W, p_hat = inputs.Q, inputs.W, inputs.p_hat
    v = np.ones(inputs.n_images)
    p = p_hat
    history = []
    for step in range(1, cfg.max_iters + 1):
        p_new = reweight_event(v, Q, cfg.alpha)
        if cfg.use_anchor:
            p_new = combine_with_anchor(p_new, p_hat)
        v_new = update_importance(W, p_new, cfg.mask_fraction)
        delta = max(np.max(np.abs(p_new - p)), np.max(np.abs(v_new - v)))
        p, v = p_new, v_new
        history.append((p, v))
        if delta < cfg.tol:
            return FusionResult(p, v, step, True)

    tail = history[-3:]
    p = np.mean([h[0] for h in tail], axis=0)
    v = np.clip(np.mean([h[1] for h in tail], axis=0), 0.0, 1.0)
    return FusionResult(p / p.sum(), v, cfg.max_iters, False)


@dataclass(frozen=True, eq=False)
class GridSearchResult:
    alpha: float
    mask_fraction: float
    table: list = field(default_factory=list)  # (alpha, m, accuracy) rows

    def to_csv(self) -> str:
        lines = ["alpha,mask_fraction,accuracy"]
        lines += [f"{a:g},{m:g},{acc:.6f}" for a, m, acc in self.table]
        return "\n".join(lines) + "\n"


def grid_search(
    validation,
    alpha_grid=DEFAULT_ALPHA_GRID,
    m_grid=DEFAULT_MASK_GRID,
    cfg: FusionConfig = FusionConfig(),
) -> GridSearchResult:
    """Pick ``(alpha, m)`` maximising top-1 accuracy on ``validation``, a
    sequence of ``(FusionInputs, EventLabelDistribution)`` pairs.

    Ties go to the smaller alpha, then the smaller m.
    """
    from .metrics import top1_accuracy

    alpha_grid, m_grid = list(alpha_grid), list(m_grid)
    if not alpha_grid or not m_grid:
        raise EmptyGrid("alpha and mask grids must be non-empty")
    validation = list(validation)
    if not validation:
        raise EmptyGrid("validation set is empty")
    labels = [gt for _, gt in validation]

    table = []
    for a, m in itertools.product(alpha_grid, m_grid):
        point = replace(cfg, alpha=a, mask_fraction=m)
        preds = [iterate(inputs, point).p for inputs, _ in validation]
        table.append((a, m, top1_accuracy(preds, labels)))
    best = min(table, key=lambda row: (-row[2], row[0], row[1]))
    return GridSearchResult(best[0], best[1], table)


def dump_results(results, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in results], fh, indent=1)
        fh.write("\n")


def load_results(path) -> list[FusionResult]:
    with open(path, encoding="utf-8") as fh:
        return [FusionResult.from_dict(d) for d in json.load(fh)]
