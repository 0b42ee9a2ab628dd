"""Synthetic albums with known event labels and image importance.

Every event owns a unit prototype direction in feature space and a power-law
importance profile ``u ** gamma``. An image's feature is its importance times
the prototype of the event it depicts, plus isotropic noise, so important
images carry more event evidence. Outlier images depict some other event and
are never important.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    AlbumRecord,
    DatasetManifest,
    EventLabelDistribution,
    EventVocabulary,
    VoteSet,
)
from .errors import ConfigError, ParseError

GAMMAS = (0.5, 1.0, 2.0)
MIN_PROTOTYPE_ANGLE = np.deg2rad(30.0)
OUTLIER_CEILING = 0.2
SECONDARY_MASS = 0.3
MAJORITY_VOTE_PROB = 0.8


@dataclass(frozen=True)
class SynthConfig:
    n_classes: int = 6
    albums_per_event: int = 40
    album_size: tuple = (8, 20)
    feature_dim: int = 24
    importance_noise: float = 0.1
    feature_noise: float = 0.3
    outlier_rate: float = 0.15
    ambiguity: float = 0.2
    workers: int = 12
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "album_size", tuple(int(x) for x in self.album_size))
        lo, hi = self.album_size
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")
        if self.albums_per_event < 1:
            raise ConfigError("albums_per_event must be >= 1")
        if not 1 <= lo <= hi:
            raise ConfigError("album_size must satisfy 1 <= min <= max")
        if self.feature_dim < 2:
            raise ConfigError("feature_dim must be >= 2")
        if self.importance_noise < 0 or self.feature_noise < 0:
            raise ConfigError("noise levels must be >= 0")
        if not 0 <= self.outlier_rate <= 1 or not 0 <= self.ambiguity <= 1:
            raise ConfigError("outlier_rate and ambiguity must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def n_albums(self) -> int:
        return self.n_classes * self.albums_per_event

    def to_dict(self):
        d = asdict(self)
        d["album_size"] = list(self.album_size)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.pos) from None


@dataclass(frozen=True, eq=False)
class GenerativeGroundTruth:
    prototypes: np.ndarray  # C x d, unit rows
    gammas: np.ndarray  # per-event profile exponents

    def profile(self, event, u):
        return np.power(u, self.gammas[event])


def event_names(n_classes):
    return tuple(f"event{c:02d}" for c in range(n_classes))


def ground_truth(cfg: SynthConfig) -> GenerativeGroundTruth:
    """Event prototypes and importance profiles for ``cfg``; depends only on
    the seed, class count and feature dimension."""
    rng = np.random.default_rng([cfg.seed, 0])
    max_cos = np.cos(MIN_PROTOTYPE_ANGLE)
    for _ in range(1000):
        P = rng.standard_normal((cfg.n_classes, cfg.feature_dim))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
        cos = np.abs(P @ P.T)
        np.fill_diagonal(cos, 0.0)
        if cos.max() <= max_cos:
            break
    else:
        raise ConfigError(
            f"could not place {cfg.n_classes} prototypes {np.rad2deg(MIN_PROTOTYPE_ANGLE):.0f} "
            f"degrees apart in {cfg.feature_dim} dimensions"
        )
    gammas = np.array([GAMMAS[c % len(GAMMAS)] for c in range(cfg.n_classes)])
    return GenerativeGroundTruth(P, gammas)


def _album(cfg, truth, index, primary):
    rng = np.random.default_rng([cfg.seed, 1, index])
    C = cfg.n_classes
    others = [c for c in range(C) if c != primary]
    probs = np.zeros(C)
    if rng.random() < cfg.ambiguity:
        probs[primary] = 1.0 - SECONDARY_MASS
        probs[rng.choice(others)] = SECONDARY_MASS
    else:
        probs[primary] = 1.0

    lo, hi = cfg.album_size
    n = int(rng.integers(lo, hi + 1))
    outlier = rng.random(n) < cfg.outlier_rate
    events = np.where(outlier, rng.choice(others, size=n), primary)
    u = rng.random(n)
    noise = rng.normal(0.0, cfg.importance_noise, size=n) if cfg.importance_noise else 0.0
    gt = np.clip(truth.profile(primary, u) + noise, 0.0, 1.0)
    gt = np.where(outlier, OUTLIER_CEILING * gt, gt)
    feats = gt[:, None] * truth.prototypes[events]
    if cfg.feature_noise:
        feats = feats + rng.normal(0.0, cfg.feature_noise, size=feats.shape)
    return probs, gt, feats, events


def generate(cfg: SynthConfig = SynthConfig(), return_events=False):
    """Build a manifest of ``n_classes * albums_per_event`` albums, split
    4:1:1 into train, validation and test.

    With ``return_events`` also returns, per album, the event index each
    image was drawn from.
    """
    truth = ground_truth(cfg)
    order = np.random.default_rng([cfg.seed, 2]).permutation(cfg.n_albums)
    n_train = round(cfg.n_albums * 4 / 6)
    n_val = round(cfg.n_albums / 6)
    split_of = np.empty(cfg.n_albums, dtype=object)
    split_of[order[:n_train]] = "train"
    split_of[order[n_train : n_train + n_val]] = "validation"
    split_of[order[n_train + n_val :]] = "test"

    albums, image_events = [], []
    for k in range(cfg.n_albums):
        primary = k // cfg.albums_per_event
        probs, gt, feats, events = _album(cfg, truth, k, primary)
        album_id = f"a{k:05d}"
        albums.append(
            AlbumRecord(
                album_id,
                [f"{album_id}_i{i:03d}" for i in range(len(gt))],
                feats,
                EventLabelDistribution(probs),
                gt,
                split_of[k],
            )
        )
        image_events.append(events)
    manifest = DatasetManifest(EventVocabulary(event_names(cfg.n_classes)), albums, cfg.feature_dim)
    return (manifest, image_events) if return_events else manifest


def simulate_votes(
    label_dist: EventLabelDistribution,
    workers: int,
    rng: np.random.Generator,
    vocab: EventVocabulary,
    album_id: str = "",
    worker_ids=None,
) -> VoteSet:
    """Simulated annotations for one album.

    Each worker picks the most likely label with probability 0.8 and
    otherwise samples one from ``label_dist``; with probability equal to the
    second-largest label mass the worker adds a second, different label
    drawn from the remaining mass.
    """
    probs = label_dist.probs
    top = int(np.argmax(probs))
    second_mass = np.sort(probs)[-2]
    ids = worker_ids if worker_ids is not None else [f"w{i:03d}" for i in range(workers)]
    votes = []
    for w in ids[:workers]:
        first = top if rng.random() < MAJORITY_VOTE_PROB else int(rng.choice(probs.size, p=probs))
        labels = {vocab.names[first]}
        if rng.random() < second_mass:
            rest = probs.copy()
            rest[first] = 0.0
            if rest.sum() > 0:
                labels.add(vocab.names[int(rng.choice(probs.size, p=rest / rest.sum()))])
        votes.append((w, frozenset(labels)))
    return VoteSet(album_id, tuple(votes))


def simulate_vote_sets(manifest: DatasetManifest, workers: int, rng) -> list[VoteSet]:
    """Votes for every album from one shared pool of ``workers`` annotators."""
    return [
        simulate_votes(a.label_dist, workers, rng, manifest.vocabulary, a.album_id)
        for a in manifest.albums
    ]
