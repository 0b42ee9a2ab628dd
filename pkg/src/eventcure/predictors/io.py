"""JSON model files: ``{"model": kind, "shapes": {...}, "params": {...}}``
with parameters as nested lists of decimal numbers."""

import json
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, ParseError
from .image_event import ImageEventModel
from .importance import ImportanceModel
from .pca import PcaTransform
from .sequence import SequenceEventModel

_KINDS = {
    "image_event": ImageEventModel,
    "sequence_event": SequenceEventModel,
    "importance": ImportanceModel,
}


def _expected_shapes(kind, params):
    """Shapes implied by the model's leading matrices; catches truncated files."""
    try:
        if kind == "image_event":
            if "W" in params:
                d, C = params["W"].shape
                return {"W": (d, C), "b": (C,)}
            d, h = params["W1"].shape
            C = params["W2"].shape[1]
            return {"W1": (d, h), "b1": (h,), "W2": (h, C), "b2": (C,)}
        if kind == "sequence_event":
            d, h4 = params["Wx"].shape
            h, C = params["Wy"].shape
            return {"Wx": (d, 4 * h), "Wh": (h, 4 * h), "b": (4 * h,), "Wy": (h, C), "by": (C,)}
        d, h = params["Wt"].shape
        C = params["Wc"].shape[1]
        return {"Wt": (d, h), "bt": (h,), "Wc": (h, C), "bc": (C,), "Wp": (h, C)}
    except (KeyError, ValueError) as exc:
        raise DimensionMismatch(f"{kind}: malformed parameter set ({exc})") from None


def model_to_dict(model):
    kind = next(k for k, cls in _KINDS.items() if isinstance(model, cls))
    return {
        "model": kind,
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
        "params": {k: v.tolist() for k, v in model.params.items()},
        "loss_history": list(model.loss_history),
    }


def model_from_dict(doc):
    kind = doc.get("model") if isinstance(doc, dict) else None
    if kind not in _KINDS:
        raise ParseError(f"unknown model kind {kind!r}")
    params = {k: np.asarray(v, dtype=np.float64) for k, v in doc.get("params", {}).items()}
    expected = _expected_shapes(kind, params)
    declared = {k: tuple(v) for k, v in doc.get("shapes", {}).items()}
    if set(params) != set(expected):
        raise DimensionMismatch(f"{kind}: parameters {sorted(params)} != {sorted(expected)}")
    for k, shape in expected.items():
        if params[k].shape != shape or declared.get(k, shape) != shape:
            raise DimensionMismatch(f"{kind}: parameter {k} has shape {params[k].shape}, expected {shape}")
    return _KINDS[kind](params, tuple(doc.get("loss_history", ())))


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.pos) from None
    except OSError as exc:
        raise ParseError(str(exc), path=path) from None


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path):
    return model_from_dict(_read_json(path))


def save_pca(t: PcaTransform, path):
    Path(path).write_text(json.dumps({"model": "pca", **t.to_dict()}) + "\n", encoding="utf-8")


def load_pca(path) -> PcaTransform:
    doc = _read_json(path)
    if not isinstance(doc, dict) or doc.get("model") != "pca":
        raise ParseError("not a PCA file", path=path)
    try:
        return PcaTransform.from_dict(doc)
    except KeyError as exc:
        raise ParseError(f"missing field {exc}", path=path) from None
