"""Joint album event recognition and event-specific image curation."""

from .dataset import (
    AlbumRecord,
    DatasetManifest,
    EventLabelDistribution,
    EventVocabulary,
    VoteSet,
    aggregate_votes,
    load_manifest,
    sample_label,
    save_manifest,
    split_half_consistency,
)
from .fusion import (
    FusionConfig,
    FusionInputs,
    FusionResult,
    combine_with_anchor,
    grid_search,
    iterate,
    reweight_event,
    update_importance,
)
from .metrics import (
    EvaluationReport,
    LabelMapping,
    evaluate_curation,
    f1_score,
    map_at,
    precision_at,
    remap_confusion,
    top1_accuracy,
)
from .synth import SynthConfig, generate, simulate_votes

__version__ = "0.1.0"
