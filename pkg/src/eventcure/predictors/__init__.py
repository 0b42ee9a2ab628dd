from .config import TrainConfig
from .gradcheck import max_relative_error, numerical_gradient, relative_error
from .image_event import ImageEventModel, predict_image_events, train_image_event
from .importance import (
    ImportanceModel,
    head_scores,
    minmax_columns,
    piecewise_ranking_loss,
    predict_importance,
    train_importance,
)
from .io import load_model, load_pca, save_model, save_pca
from .pca import PcaTransform, pca_apply, pca_fit
from .sequence import (
    SequenceEventModel,
    lstm_step,
    lstm_step_grad,
    predict_sequence_event,
    train_sequence_event,
)

__all__ = [
    "TrainConfig",
    "PcaTransform",
    "pca_fit",
    "pca_apply",
    "ImageEventModel",
    "train_image_event",
    "predict_image_events",
    "SequenceEventModel",
    "lstm_step",
    "lstm_step_grad",
    "train_sequence_event",
    "predict_sequence_event",
    "ImportanceModel",
    "piecewise_ranking_loss",
    "train_importance",
    "predict_importance",
    "head_scores",
    "minmax_columns",
    "numerical_gradient",
    "relative_error",
    "max_relative_error",
    "save_model",
    "load_model",
    "save_pca",
    "load_pca",
]
