"""Album data model, vote aggregation and manifest persistence.

A manifest is one JSON document plus one binary feature file per album::

    {"vocabulary": [...], "feature_dim": d,
     "albums": [{"album_id", "image_ids", "label_dist", "gt_importance",
                 "split", "features_file"}, ...]}

Feature files start with the magic ``EVCF``, then uint32 N, uint32 d and
N*d little-endian float32 values in row-major image order.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    NoOverlap,
    NoSurvivingLabel,
    NoWorkers,
    ParseError,
    UnknownLabel,
)

SPLITS = ("train", "validation", "test")
FEATURE_MAGIC = b"EVCF"
_HEADER = struct.Struct("<4sII")
_FEATURE_DTYPE = np.dtype("<f4")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EventVocabulary:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(names) < 2:
            raise ConfigError("vocabulary needs at least two event types")
        if any(not isinstance(n, str) or not n for n in names):
            raise ConfigError("event names must be non-empty strings")
        if len(set(names)) != len(names):
            raise ConfigError("event names must be unique")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownLabel(f"unknown event label {name!r}") from None


@dataclass(frozen=True)
class VoteSet:
    """Votes for one album: ``votes`` holds ``(worker_id, labels)`` pairs."""

    album_id: str
    votes: tuple[tuple[str, frozenset[str]], ...]

    def __post_init__(self):
        votes = tuple((w, frozenset(labels)) for w, labels in self.votes)
        object.__setattr__(self, "votes", votes)
        workers = [w for w, _ in votes]
        if len(set(workers)) != len(workers):
            raise ConfigError(f"album {self.album_id}: a worker voted twice")
        for w, labels in votes:
            if not 1 <= len(labels) <= 3:
                raise ConfigError(
                    f"album {self.album_id}: worker {w} selected {len(labels)} labels"
                )

    @property
    def workers(self) -> list[str]:
        return [w for w, _ in self.votes]

    def label_counts(self) -> Counter:
        counts = Counter()
        for _, labels in self.votes:
            counts.update(labels)
        return counts


class EventLabelDistribution:
    """Probability distribution over the C event types of a vocabulary."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = _frozen(probs, np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ConfigError("label distribution must be a vector of length >= 2")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ConfigError("label distribution entries must be finite and >= 0")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ConfigError(f"label distribution sums to {p.sum()!r}, not 1")
        self.probs = p

    @classmethod
    def degenerate(cls, index: int, n_classes: int) -> "EventLabelDistribution":
        p = np.zeros(n_classes)
        p[index] = 1.0
        return cls(p)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.probs > 0))

    @property
    def top(self) -> int:
        return int(np.argmax(self.probs))

    def __len__(self):
        return self.probs.size

    def __eq__(self, other):
        if not isinstance(other, EventLabelDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"EventLabelDistribution({self.probs.tolist()})"


class AlbumRecord:
    """One album: an ordered image sequence with its features and labels.

    Features are held as float32 so that what is in memory is exactly what
    the feature file stores.
    """

    __slots__ = ("album_id", "image_ids", "features", "gt_importance", "label_dist", "split")

    def __init__(self, album_id, image_ids, features, label_dist, gt_importance=None, split="train"):
        image_ids = tuple(str(i) for i in image_ids)
        if not image_ids:
            raise ConfigError(f"album {album_id}: needs at least one image")
        feats = _frozen(features, np.float32)
        if feats.ndim != 2 or feats.shape[0] != len(image_ids):
            raise DimensionMismatch(
                f"album {album_id}: features have shape {feats.shape}, "
                f"expected ({len(image_ids)}, d)"
            )
        if gt_importance is not None:
            gt = _frozen(gt_importance, np.float64)
            if gt.shape != (len(image_ids),):
                raise DimensionMismatch(
                    f"album {album_id}: {gt.size} importance values for {len(image_ids)} images"
                )
            if np.any(~np.isfinite(gt)) or np.any(gt < 0) or np.any(gt > 1):
                raise ConfigError(f"album {album_id}: importance values must lie in [0, 1]")
            gt_importance = gt
        if not isinstance(label_dist, EventLabelDistribution):
            label_dist = EventLabelDistribution(label_dist)
        if split not in SPLITS:
            raise ConfigError(f"album {album_id}: unknown split {split!r}")
        self.album_id = str(album_id)
        self.image_ids = image_ids
        self.features = feats
        self.gt_importance = gt_importance
        self.label_dist = label_dist
        self.split = split

    def __len__(self):
        return len(self.image_ids)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def with_features(self, features) -> "AlbumRecord":
        return AlbumRecord(
            self.album_id, self.image_ids, features, self.label_dist, self.gt_importance, self.split
        )

    def __eq__(self, other):
        if not isinstance(other, AlbumRecord):
            return NotImplemented
        same_gt = (self.gt_importance is None and other.gt_importance is None) or (
            self.gt_importance is not None
            and other.gt_importance is not None
            and np.array_equal(self.gt_importance, other.gt_importance)
        )
        return (
            self.album_id == other.album_id
            and self.image_ids == other.image_ids
            and self.split == other.split
            and self.label_dist == other.label_dist
            and self.features.tobytes() == other.features.tobytes()
            and self.features.shape == other.features.shape
            and same_gt
        )

    def __repr__(self):
        return f"AlbumRecord({self.album_id!r}, N={len(self)}, split={self.split!r})"


@dataclass(frozen=True, eq=True)
class DatasetManifest:
    vocabulary: EventVocabulary
    albums: tuple[AlbumRecord, ...]
    feature_dim: int

    def __post_init__(self):
        object.__setattr__(self, "albums", tuple(self.albums))
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be positive")
        C = len(self.vocabulary)
        ids = set()
        for a in self.albums:
            if a.feature_dim != self.feature_dim:
                raise DimensionMismatch(
                    f"album {a.album_id}: feature dim {a.feature_dim} != {self.feature_dim}"
                )
            if len(a.label_dist) != C:
                raise DimensionMismatch(
                    f"album {a.album_id}: label distribution has {len(a.label_dist)} entries, "
                    f"vocabulary has {C}"
                )
            if a.album_id in ids:
                raise ConfigError(f"duplicate album id {a.album_id!r}")
            ids.add(a.album_id)

    @property
    def n_classes(self) -> int:
        return len(self.vocabulary)

    def split(self, name: str) -> list[AlbumRecord]:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        return [a for a in self.albums if a.split == name]

    def map_features(self, fn, feature_dim: int) -> "DatasetManifest":
        """Return a copy with every album's features replaced by ``fn(features)``."""
        albums = [a.with_features(fn(np.asarray(a.features, dtype=np.float64))) for a in self.albums]
        return DatasetManifest(self.vocabulary, albums, feature_dim)


# --------------------------------------------------------------------------
# votes


def aggregate_votes(votes: VoteSet, vocab: EventVocabulary) -> EventLabelDistribution:
    """Turn raw votes into a label distribution.

    Each selected label counts as one vote; labels that received exactly one
    vote are discarded before normalising.
    """
    counts = votes.label_counts()
    p = np.zeros(len(vocab))
    for name, n in counts.items():
        p[vocab.index(name)] = n
    p[p == 1] = 0.0
    total = p.sum()
    if total == 0:
        raise NoSurvivingLabel(f"album {votes.album_id}: every label has a single vote")
    return EventLabelDistribution(p / total)


def sample_label(dist: EventLabelDistribution, rng: np.random.Generator) -> int:
    """Draw one event index from ``dist``."""
    cdf = np.cumsum(dist.probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    # the cumulative sum can fall short of 1 by an ulp
    idx = min(idx, dist.probs.size - 1)
    while dist.probs[idx] == 0:
        idx -= 1
    return idx


def _top_labels(counts: Counter) -> set[str]:
    best = max(counts.values())
    return {k for k, v in counts.items() if v == best}


def split_half_consistency(
    votesets: Sequence[VoteSet], trials: int, rng: np.random.Generator
) -> float:
    """Fraction of albums whose top-voted label agrees between two random
    halves of the worker pool, pooled over ``trials`` random splits.

    Albums where one half cast no vote are left out of that trial. Ties are
    resolved generously: the halves agree when their sets of top labels
    intersect.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    # order of first appearance keeps the result independent of worker naming
    workers = list(dict.fromkeys(w for vs in votesets for w in vs.workers))
    if not workers:
        raise NoWorkers("no workers in the vote sets")

    index = {w: i for i, w in enumerate(workers)}
    agree = 0
    counted = 0
    half = len(workers) // 2
    for _ in range(trials):
        in_first = np.zeros(len(workers), dtype=bool)
        in_first[rng.permutation(len(workers))[:half]] = True
        for vs in votesets:
            a, b = Counter(), Counter()
            for w, labels in vs.votes:
                (a if in_first[index[w]] else b).update(labels)
            if not a or not b:
                continue
            counted += 1
            agree += bool(_top_labels(a) & _top_labels(b))
    if counted == 0:
        raise NoOverlap("no album had votes from both halves in any trial")
    return agree / counted


# --------------------------------------------------------------------------
# persistence


def write_features(path, features) -> None:
    feats = np.ascontiguousarray(features, dtype=_FEATURE_DTYPE)
    if feats.ndim != 2:
        raise DimensionMismatch("features must be a 2-d array")
    n, d = feats.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEATURE_MAGIC, n, d))
        fh.write(feats.tobytes(order="C"))


def read_features(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError("truncated feature header", path=path, offset=len(data))
    magic, n, d = _HEADER.unpack_from(data, 0)
    if magic != FEATURE_MAGIC:
        raise ParseError(f"bad magic {magic!r}", path=path, offset=0)
    expected = _HEADER.size + 4 * n * d
    if len(data) != expected:
        raise ParseError(
            f"expected {expected} bytes for a {n}x{d} matrix, found {len(data)}",
            path=path,
            offset=min(len(data), expected),
        )
    return np.frombuffer(data, dtype=_FEATURE_DTYPE, offset=_HEADER.size).reshape(n, d)


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write ``manifest`` to ``path`` and its feature files to a sibling
    ``features/`` directory."""
    path = Path(path)
    feat_dir = path.parent / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    albums = []
    for i, a in enumerate(manifest.albums):
        rel = f"features/album_{i:05d}.evcf"
        write_features(path.parent / rel, a.features)
        albums.append(
            {
                "album_id": a.album_id,
                "image_ids": list(a.image_ids),
                "label_dist": a.label_dist.probs.tolist(),
                "gt_importance": None if a.gt_importance is None else a.gt_importance.tolist(),
                "split": a.split,
                "features_file": rel,
            }
        )
    doc = {
        "vocabulary": list(manifest.vocabulary.names),
        "feature_dim": manifest.feature_dim,
        "albums": albums,
    }
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _require(obj, key, kind, path):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing field {key!r}", path=path)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"field {key!r} has type {type(value).__name__}", path=path)
    return value


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.pos) from None
    except OSError as exc:
        raise ParseError(str(exc), path=path) from None

    vocab = EventVocabulary(tuple(_require(doc, "vocabulary", list, path)))
    feature_dim = _require(doc, "feature_dim", int, path)
    albums = []
    for entry in _require(doc, "albums", list, path):
        album_id = _require(entry, "album_id", str, path)
        image_ids = _require(entry, "image_ids", list, path)
        feats = read_features(path.parent / _require(entry, "features_file", str, path))
        if feats.shape[0] != len(image_ids):
            raise DimensionMismatch(
                f"album {album_id}: {feats.shape[0]} feature rows for {len(image_ids)} images"
            )
        if feats.shape[1] != feature_dim:
            raise DimensionMismatch(
                f"album {album_id}: feature dim {feats.shape[1]} != {feature_dim}"
            )
        albums.append(
            AlbumRecord(
                album_id,
                image_ids,
                feats,
                EventLabelDistribution(_require(entry, "label_dist", list, path)),
                entry.get("gt_importance"),
                _require(entry, "split", str, path),
            )
        )
    return DatasetManifest(vocab, albums, feature_dim)


def iter_labels(albums: Iterable[AlbumRecord]) -> list[EventLabelDistribution]:
    return [a.label_dist for a in albums]
