"""End-to-end experiment plumbing: PCA, the three predictors, fusion and the
comparison methods.

Recognition methods produce an album event distribution, curation methods a
per-image score vector; the two iterative methods produce both.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import AlbumRecord, DatasetManifest
from .errors import ConfigError, EmptySplit
from .fusion import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_MASK_GRID,
    FusionConfig,
    FusionInputs,
    FusionResult,
    grid_search,
    iterate,
)
from .metrics import T_LIST, EvaluationReport, evaluate_curation, evaluate_recognition
from .predictors import (
    ImageEventModel,
    ImportanceModel,
    PcaTransform,
    SequenceEventModel,
    TrainConfig,
    pca_apply,
    pca_fit,
    predict_image_events,
    predict_importance,
    predict_sequence_event,
    train_image_event,
    train_importance,
    train_sequence_event,
)
from .synth import SynthConfig, generate

RECOGNITION_METHODS = ("cnn-recognition", "cnn-lstm", "cnn-iterative", "cnn-lstm-iterative")
CURATION_METHODS = ("cnn-iterative", "cnn-lstm-iterative", "noevent-test", "gt-event", "random")
METHODS = (
    "cnn-recognition",
    "cnn-lstm",
    "cnn-iterative",
    "cnn-lstm-iterative",
    "noevent-test",
    "gt-event",
    "random",
)


def substream_seed(seed: int, name: str) -> int:
    """Seed for the named random stream derived from one master seed."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("EVENTCURE_THREADS", "1")))
    except ValueError:
        raise ConfigError("EVENTCURE_THREADS must be an integer") from None


def _pmap(fn, items):
    n = thread_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PipelineConfig:
    image: TrainConfig = TrainConfig(learning_rate=0.2, epochs=30, batch_size=32, hidden=0)
    sequence: TrainConfig = TrainConfig(learning_rate=2.0, epochs=30, batch_size=16, hidden=32)
    importance: TrainConfig = TrainConfig(learning_rate=0.5, epochs=20, batch_size=32, hidden=32)
    pairs_per_album: int = 16
    reduced_dim: int = 16

    @classmethod
    def from_dict(cls, d) -> "PipelineConfig":
        """Override defaults from a mapping; model sections take TrainConfig
        fields, e.g. ``{"sequence": {"epochs": 10}, "reduced_dim": 8}``."""
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown pipeline config fields: {sorted(unknown)}")
        base = cls()
        kwargs = {}
        for key, value in d.items():
            if key in ("image", "sequence", "importance"):
                if not isinstance(value, dict):
                    raise ConfigError(f"{key} must be a mapping of training options")
                bad = set(value) - set(TrainConfig.__dataclass_fields__)
                if bad:
                    raise ConfigError(f"unknown {key} training fields: {sorted(bad)}")
                kwargs[key] = replace(getattr(base, key), **value)
            else:
                kwargs[key] = value
        return replace(base, **kwargs)

    def to_dict(self):
        return {
            "image": self.image.to_dict(),
            "sequence": self.sequence.to_dict(),
            "importance": self.importance.to_dict(),
            "pairs_per_album": self.pairs_per_album,
            "reduced_dim": self.reduced_dim,
        }

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(
            self,
            image=replace(self.image, seed=substream_seed(seed, "train/image")),
            sequence=replace(self.sequence, seed=substream_seed(seed, "train/sequence")),
            importance=replace(self.importance, seed=substream_seed(seed, "train/importance")),
        )


@dataclass(frozen=True, eq=False)
class Predictors:
    pca: PcaTransform
    image_model: ImageEventModel
    sequence_model: SequenceEventModel
    importance_model: ImportanceModel

    def reduce(self, album: AlbumRecord) -> np.ndarray:
        return pca_apply(self.pca, album.features)

    def fusion_inputs(self, album: AlbumRecord) -> FusionInputs:
        X = self.reduce(album)
        return FusionInputs(
            predict_image_events(self.image_model, X),
            predict_importance(self.importance_model, X),
            predict_sequence_event(self.sequence_model, X),
        )


def fit_pca(manifest: DatasetManifest, reduced_dim: int) -> PcaTransform:
    train = manifest.split("train")
    if not train:
        raise EmptySplit("no training albums")
    X = np.concatenate([np.asarray(a.features, dtype=np.float64) for a in train])
    return pca_fit(X, min(reduced_dim, manifest.feature_dim))


def reduce_manifest(manifest: DatasetManifest, pca: PcaTransform) -> DatasetManifest:
    return manifest.map_features(lambda X: pca_apply(pca, X), pca.reduced_dim)


def train_one(which: str, reduced: DatasetManifest, cfg: PipelineConfig):
    if which == "image-event":
        return train_image_event(reduced, cfg.image)
    if which == "sequence-event":
        return train_sequence_event(reduced, cfg.sequence)
    if which == "importance":
        return train_importance(reduced, cfg.importance, cfg.pairs_per_album)
    raise ConfigError(f"unknown model {which!r}")


def train_predictors(manifest: DatasetManifest, cfg: PipelineConfig = PipelineConfig()) -> Predictors:
    pca = fit_pca(manifest, cfg.reduced_dim)
    reduced = reduce_manifest(manifest, pca)
    return Predictors(
        pca,
        train_one("image-event", reduced, cfg),
        train_one("sequence-event", reduced, cfg),
        train_one("importance", reduced, cfg),
    )


@dataclass
class MethodOutput:
    method: str
    p: list = field(default_factory=list)  # per-album event distributions, or empty
    v: list = field(default_factory=list)  # per-album importance scores, or empty
    fusion: list = field(default_factory=list)  # FusionResult per album for iterative methods


def run_method(
    method: str,
    inputs: list[FusionInputs],
    albums: list[AlbumRecord],
    fusion_cfg: FusionConfig = FusionConfig(),
    rng: np.random.Generator | None = None,
) -> MethodOutput:
    """Apply one comparison method to precomputed fusion inputs."""
    out = MethodOutput(method)
    if method == "cnn-recognition":
        out.p = [x.Q.mean(axis=0) for x in inputs]
    elif method == "cnn-lstm":
        out.p = [x.p_hat for x in inputs]
    elif method in ("cnn-iterative", "cnn-lstm-iterative"):
        cfg = replace(fusion_cfg, use_anchor=method == "cnn-lstm-iterative")
        results = _pmap(lambda x: iterate(x, cfg), inputs)
        out.fusion = [replace(r, album_id=a.album_id) for r, a in zip(results, albums)]
        out.p = [r.p for r in results]
        out.v = [r.v for r in results]
    elif method == "noevent-test":
        out.v = [x.W.mean(axis=1) for x in inputs]
    elif method == "gt-event":
        out.v = [x.W[:, a.label_dist.top] for x, a in zip(inputs, albums)]
    elif method == "random":
        if rng is None:
            raise ConfigError("the random method needs a random generator")
        out.v = [rng.random(x.n_images) for x in inputs]
    else:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return out


def evaluate_output(out: MethodOutput, albums, t_list=T_LIST) -> EvaluationReport:
    report = EvaluationReport(out.method)
    if out.p:
        evaluate_recognition(albums, out.p, report=report)
    if out.v:
        curation = evaluate_curation(albums, out.v, t_list)
        report.cells.extend(curation.cells)
    return report


def select_fusion_params(
    predictors: Predictors,
    manifest: DatasetManifest,
    base: FusionConfig = FusionConfig(),
    alpha_grid=DEFAULT_ALPHA_GRID,
    m_grid=DEFAULT_MASK_GRID,
):
    """Grid-search ``(alpha, m)`` on the validation split."""
    val = manifest.split("validation")
    if not val:
        raise EmptySplit("no validation albums")
    pairs = [(predictors.fusion_inputs(a), a.label_dist) for a in val]
    return grid_search(pairs, alpha_grid, m_grid, base)


@dataclass
class ExperimentResult:
    seed: int
    alpha: float
    mask_fraction: float
    reports: dict  # method -> EvaluationReport


def run_experiment(
    seed: int,
    synth_cfg: SynthConfig = SynthConfig(),
    cfg: PipelineConfig = PipelineConfig(),
    methods=METHODS,
    t_list=T_LIST,
    fusion_cfg: FusionConfig = FusionConfig(),
    tune=True,
) -> ExperimentResult:
    """Generate data, train, tune (alpha, m) on validation and evaluate every
    method on the test split. All randomness derives from ``seed``."""
    manifest = generate(replace(synth_cfg, seed=substream_seed(seed, "synth")))
    predictors = train_predictors(manifest, cfg.with_seed(seed))
    if tune:
        best = select_fusion_params(predictors, manifest, fusion_cfg)
        fusion_cfg = replace(fusion_cfg, alpha=best.alpha, mask_fraction=best.mask_fraction)
    test = manifest.split("test")
    inputs = [predictors.fusion_inputs(a) for a in test]
    rng = np.random.default_rng(substream_seed(seed, "eval"))
    reports = {
        m: evaluate_output(run_method(m, inputs, test, fusion_cfg, rng), test, t_list)
        for m in methods
    }
    return ExperimentResult(seed, fusion_cfg.alpha, fusion_cfg.mask_fraction, reports)
