"""Command-line front end: ``eventcure {synth,train,fuse,evaluate,gridsearch}``.

Exit codes: 0 success, 1 usage error, 2 data or model error, 3 internal
invariant violation. Every output file is refused if it already exists
unless ``--force`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import load_manifest, save_manifest
from .errors import ConfigError, EventCureError, InvariantViolation, ParseError
from .fusion import DEFAULT_ALPHA_GRID, DEFAULT_MASK_GRID, FusionConfig, FusionResult, grid_search
from .metrics import T_LIST
from .pipeline import (
    METHODS,
    PipelineConfig,
    Predictors,
    evaluate_output,
    fit_pca,
    reduce_manifest,
    run_method,
    substream_seed,
    train_one,
)
from .predictors import (
    ImageEventModel,
    ImportanceModel,
    SequenceEventModel,
    load_model,
    load_pca,
    save_model,
    save_pca,
)
from .synth import SynthConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3
MODEL_KINDS = {
    "image-event": ImageEventModel,
    "sequence-event": SequenceEventModel,
    "importance": ImportanceModel,
}
PCA_FILE = "pca.json"
MANIFEST_FILE = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _float_list(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _t_list(text):
    values = _float_list(text)
    if any(not 0 < t <= 100 for t in values):
        raise argparse.ArgumentTypeError("t values must lie in (0, 100]")
    return [int(t) if t == int(t) else t for t in values]


def _json_file(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.pos) from None
    except OSError as exc:
        raise ParseError(str(exc), path=path) from None


def _guard(paths, force):
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _fusion_config(args) -> FusionConfig:
    return FusionConfig(
        alpha=args.alpha,
        mask_fraction=args.mask_fraction,
        max_iters=args.max_iters,
        tol=args.tol,
        use_anchor=not getattr(args, "no_anchor", False),
    )


def _pipeline_config(args) -> PipelineConfig:
    if args.config is None:
        return PipelineConfig()
    doc = _json_file(args.config)
    if not isinstance(doc, dict):
        raise ConfigError(f"{args.config}: expected a JSON object")
    return PipelineConfig.from_dict(doc)


def _load_predictors(models_dir) -> Predictors:
    models_dir = Path(models_dir)
    loaded = {}
    for kind, cls in MODEL_KINDS.items():
        model = load_model(models_dir / f"{kind}.json")
        if not isinstance(model, cls):
            raise ParseError(f"expected a {kind} model", path=models_dir / f"{kind}.json")
        loaded[kind] = model
    return Predictors(
        load_pca(models_dir / PCA_FILE),
        loaded["image-event"],
        loaded["sequence-event"],
        loaded["importance"],
    )


def _check_result(r: FusionResult):
    if not (np.all(r.p >= 0) and abs(r.p.sum() - 1.0) <= 1e-9):
        raise InvariantViolation(f"album {r.album_id}: event distribution is not normalised")
    if not np.all((r.v >= 0) & (r.v <= 1)):
        raise InvariantViolation(f"album {r.album_id}: importance outside [0, 1]")


def cmd_synth(args):
    out = Path(args.out)
    manifest_path = out / MANIFEST_FILE
    _guard([manifest_path], args.force)
    cfg = SynthConfig.from_json(args.config) if args.config else SynthConfig()
    cfg = replace(cfg, seed=substream_seed(args.seed, "synth"))
    save_manifest(generate(cfg), manifest_path)
    print(f"wrote {manifest_path} ({cfg.n_albums} albums)")


def cmd_train(args):
    out = Path(args.out)
    kinds = list(MODEL_KINDS) if args.which == "all" else [args.which]
    targets = [out / f"{k}.json" for k in kinds]
    manifest = load_manifest(args.manifest)
    cfg = _pipeline_config(args).with_seed(args.seed)
    pca = fit_pca(manifest, cfg.reduced_dim)

    pca_path = out / PCA_FILE
    pca_doc = {"model": "pca", **pca.to_dict()}
    pca_same = pca_path.exists() and _json_file(pca_path) == json.loads(json.dumps(pca_doc))
    _guard(targets + ([] if pca_same else [pca_path]), args.force)

    reduced = reduce_manifest(manifest, pca)
    models = {k: train_one(k, reduced, cfg) for k in kinds}
    out.mkdir(parents=True, exist_ok=True)
    save_pca(pca, pca_path)
    for k, path in zip(kinds, targets):
        save_model(models[k], path)
        print(f"wrote {path}")


def _split_albums(manifest, split):
    albums = manifest.split(split)
    if not albums:
        raise ConfigError(f"manifest has no {split!r} albums")
    return albums


def cmd_fuse(args):
    _guard([args.out], args.force)
    manifest = load_manifest(args.manifest)
    predictors = _load_predictors(args.models)
    albums = _split_albums(manifest, args.split)
    inputs = [predictors.fusion_inputs(a) for a in albums]
    method = "cnn-lstm-iterative" if not args.no_anchor else "cnn-iterative"
    out = run_method(method, inputs, albums, _fusion_config(args))
    for r in out.fusion:
        _check_result(r)
    _write_text(args.out, json.dumps([r.to_dict() for r in out.fusion], indent=1) + "\n")
    print(f"wrote {args.out} ({len(out.fusion)} albums)")


def cmd_evaluate(args):
    _guard([args.out], args.force)
    manifest = load_manifest(args.manifest)
    predictors = _load_predictors(args.models)
    albums = _split_albums(manifest, args.split)
    inputs = [predictors.fusion_inputs(a) for a in albums]
    rng = np.random.default_rng(substream_seed(args.seed, "eval"))
    out = run_method(args.method, inputs, albums, _fusion_config(args), rng)
    for r in out.fusion:
        _check_result(r)
    report = evaluate_output(out, albums, args.t_list)
    _write_text(args.out, report.to_csv())
    print(f"wrote {args.out}")


def cmd_gridsearch(args):
    _guard([args.out], args.force)
    manifest = load_manifest(args.manifest)
    predictors = _load_predictors(args.models)
    albums = _split_albums(manifest, args.split)
    pairs = [(predictors.fusion_inputs(a), a.label_dist) for a in albums]
    best = grid_search(pairs, args.alpha_grid, args.m_grid, _fusion_config(args))
    _write_text(args.out, best.to_csv())
    print(f"best alpha={best.alpha:g} mask_fraction={best.mask_fraction:g}; wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eventcure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(p, *, manifest=True, models=False):
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        if models:
            p.add_argument("--models", required=True, help="directory written by 'train'")
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    def fusion_flags(p):
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--mask-fraction", type=float, default=0.0)
        p.add_argument("--max-iters", type=int, default=10)
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--split", default="test", choices=("train", "validation", "test"))

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p, manifest=False)
    p.add_argument("--config", help="JSON file of synthetic-data options")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit PCA and train predictors")
    common(p)
    p.add_argument("--which", default="all", choices=(*MODEL_KINDS, "all"))
    p.add_argument("--config", help="JSON file of training options")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fuse", help="run the iterative fusion and dump per-album results")
    common(p, models=True)
    fusion_flags(p)
    p.add_argument("--no-anchor", action="store_true", help="skip averaging with the sequence prediction")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="score one method and write a report CSV")
    common(p, models=True)
    fusion_flags(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--t-list", type=_t_list, default=list(T_LIST))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gridsearch", help="choose alpha and mask fraction on a split")
    common(p, models=True)
    fusion_flags(p)
    p.set_defaults(split="validation")
    p.add_argument("--alpha-grid", type=_float_list, default=list(DEFAULT_ALPHA_GRID))
    p.add_argument("--m-grid", type=_float_list, default=list(DEFAULT_MASK_GRID))
    p.set_defaults(func=cmd_gridsearch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        args.func(args)
    except InvariantViolation as exc:
        print(f"eventcure: internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except EventCureError as exc:
        print(f"eventcure: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
