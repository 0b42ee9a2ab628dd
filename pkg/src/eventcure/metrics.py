"""Curation metrics (MAP@t%, P@t%), recognition metrics (top-1 accuracy,
macro F1) and confusion-matrix relabelling for cross-dataset comparison.

Rankings break ties by the lower image index, and the relevant set for an
album of N images at t% is its top ``max(1, ceil(t/100 * N))`` images by
ground truth.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AllDropped,
    ConfigError,
    DimensionMismatch,
    EmptyAlbum,
    LengthMismatch,
    MissingGroundTruth,
    ParseError,
)

T_LIST = (5, 10, 15, 20, 25, 30)


def _ranking(scores):
    # stable sort on the negated scores: descending, lower index first on ties
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def _prepare(predicted, ground_truth, t):
    pred = np.asarray(predicted, dtype=np.float64)
    gt = np.asarray(ground_truth, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 1:
        raise LengthMismatch(f"predicted {pred.shape} vs ground truth {gt.shape}")
    if pred.size == 0:
        raise EmptyAlbum("album has no images")
    if not 0 < t <= 100:
        raise ConfigError(f"t must be in (0, 100], got {t}")
    return pred, gt, cutoff(pred.size, t)


def cutoff(n: int, t: float) -> int:
    return max(1, math.ceil(t / 100 * n))


def precision_at(predicted, ground_truth, t) -> float:
    pred, gt, k = _prepare(predicted, ground_truth, t)
    relevant = set(_ranking(gt)[:k].tolist())
    retrieved = _ranking(pred)[:k].tolist()
    return sum(i in relevant for i in retrieved) / k


def map_at(predicted, ground_truth, t) -> float:
    pred, gt, k = _prepare(predicted, ground_truth, t)
    relevant = np.zeros(pred.size, dtype=bool)
    relevant[_ranking(gt)[:k]] = True
    hits = relevant[_ranking(pred)]
    ranks = np.flatnonzero(hits) + 1
    return float(np.sum(np.arange(1, ranks.size + 1) / ranks) / k)


def _argmaxes(predictions):
    return [int(np.argmax(np.asarray(p))) for p in predictions]


def _supports(gts):
    return [set(getattr(g, "support", g)) for g in gts]


def top1_accuracy(predictions: Sequence, gts: Sequence) -> float:
    """Share of albums whose most likely predicted event is among the
    ground-truth labels. ``gts`` holds label distributions or index sets."""
    if len(predictions) != len(gts):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(gts)} albums")
    if len(predictions) == 0:
        raise LengthMismatch("no albums")
    tops, sups = _argmaxes(predictions), _supports(gts)
    return sum(t in s for t, s in zip(tops, sups)) / len(tops)


def f1_score(predictions: Sequence, gts: Sequence, n_classes: int | None = None) -> float:
    """Macro F1 over the classes that occur in some ground-truth support.

    A top-1 prediction inside the support is a true positive for that class
    only; misses count as false negatives for every supported class.
    """
    if len(predictions) != len(gts):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(gts)} albums")
    if len(predictions) == 0:
        raise LengthMismatch("no albums")
    tops, sups = _argmaxes(predictions), _supports(gts)
    C = n_classes or max(len(np.asarray(p)) for p in predictions)
    tp, fp, fn = np.zeros(C), np.zeros(C), np.zeros(C)
    present = np.zeros(C, dtype=bool)
    for top, sup in zip(tops, sups):
        present[list(sup)] = True
        if top in sup:
            tp[top] += 1
        else:
            fp[top] += 1
            fn[list(sup)] += 1
    scores = []
    for c in np.flatnonzero(present):
        prec = tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] else 0.0
        rec = tp[c] / (tp[c] + fn[c]) if tp[c] + fn[c] else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# confusion matrices


@dataclass(frozen=True)
class LabelMapping:
    """``targets[i]`` is the target index for source class ``i``, or None
    when the class is dropped."""

    targets: tuple
    target_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "target_names", tuple(self.target_names))
        kept = [t for t in self.targets if t is not None]
        if any(not isinstance(t, (int, np.integer)) or t < 0 for t in kept):
            raise ConfigError("mapping targets must be non-negative integers or None")

    @property
    def n_targets(self) -> int:
        kept = [t for t in self.targets if t is not None]
        if self.target_names:
            return len(self.target_names)
        return max(kept) + 1 if kept else 0

    @classmethod
    def from_names(cls, source_names, target_names, mapping: dict):
        """Build from a ``{source_name: target_name | None}`` dictionary."""
        target_names = list(target_names)
        targets = []
        for s in source_names:
            if s not in mapping:
                raise ConfigError(f"mapping does not cover source class {s!r}")
            t = mapping[s]
            if t is not None and t not in target_names:
                raise ConfigError(f"unknown target class {t!r}")
            targets.append(None if t is None else target_names.index(t))
        return cls(tuple(targets), tuple(target_names))


def remap_confusion(cm, mapping: LabelMapping, loose: bool = True):
    """Merge and drop classes of a confusion matrix (rows true, columns
    predicted). Returns ``(remapped, accuracy)``.

    Rows of dropped classes leave the evaluation. Predictions that fall on a
    dropped class are counted as correct when ``loose`` is set, and as
    errors otherwise.
    """
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise DimensionMismatch(f"confusion matrix must be square, got {cm.shape}")
    if np.any(cm < 0):
        raise ConfigError("confusion counts must be non-negative")
    if len(mapping.targets) != cm.shape[0]:
        raise DimensionMismatch(
            f"mapping covers {len(mapping.targets)} classes, matrix has {cm.shape[0]}"
        )
    if all(t is None for t in mapping.targets):
        raise AllDropped("every class is dropped")

    K = mapping.n_targets
    out = np.zeros((K, K), dtype=cm.dtype)
    lost = 0
    for i, ti in enumerate(mapping.targets):
        if ti is None:
            continue
        for j, tj in enumerate(mapping.targets):
            if tj is not None:
                out[ti, tj] += cm[i, j]
            elif loose:
                out[ti, ti] += cm[i, j]
            else:
                lost += cm[i, j]
    total = out.sum() + lost
    accuracy = float(np.trace(out) / total) if total else 0.0
    return out, accuracy


def save_confusion(path, counts, class_names) -> None:
    doc = {"classes": list(class_names), "matrix": np.asarray(counts).tolist()}
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_confusion(path):
    """Read ``{"classes": [...], "matrix": [[...]]}``; returns (counts, names)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.pos) from None
    try:
        names, matrix = list(doc["classes"]), np.asarray(doc["matrix"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed confusion matrix ({exc})", path=path) from None
    if matrix.shape != (len(names), len(names)):
        raise DimensionMismatch(f"{len(names)} classes but matrix shape {matrix.shape}")
    return matrix, names


# --------------------------------------------------------------------------
# reports


@dataclass
class EvaluationReport:
    """Flat list of ``(metric, t, value)`` cells; ``t`` is None for
    recognition metrics."""

    method: str = ""
    cells: list = field(default_factory=list)

    def add(self, metric, t, value):
        self.cells.append((metric, t, float(value)))

    def get(self, metric, t=None):
        for m, tt, v in self.cells:
            if m == metric and tt == t:
                return v
        raise KeyError((metric, t))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "t", "value"])
        for m, t, v in self.cells:
            w.writerow([m, "" if t is None else f"{t:g}", f"{v:.6f}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def evaluate_curation(albums, scores, t_list=T_LIST, method="") -> EvaluationReport:
    """Mean MAP@t and P@t over albums. ``scores[k]`` is a predicted
    importance vector or anything with a ``v`` attribute."""
    albums, scores = list(albums), list(scores)
    if len(albums) != len(scores):
        raise LengthMismatch(f"{len(scores)} score vectors for {len(albums)} albums")
    for a in albums:
        if a.gt_importance is None:
            raise MissingGroundTruth(f"album {a.album_id} has no importance ground truth")
    vs = [getattr(s, "v", s) for s in scores]
    report = EvaluationReport(method)
    for t in t_list:
        report.add("MAP", t, np.mean([map_at(v, a.gt_importance, t) for a, v in zip(albums, vs)]))
    for t in t_list:
        report.add("P", t, np.mean([precision_at(v, a.gt_importance, t) for a, v in zip(albums, vs)]))
    return report


def evaluate_recognition(albums, predictions, method="", report=None) -> EvaluationReport:
    report = report if report is not None else EvaluationReport(method)
    gts = [a.label_dist for a in albums]
    preds = [getattr(p, "p", p) for p in predictions]
    C = len(gts[0]) if gts else None
    report.add("accuracy", None, top1_accuracy(preds, gts))
    report.add("f1", None, f1_score(preds, gts, C))
    return report
