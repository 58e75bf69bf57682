"""``artik`` command line: generate, train, eval, heatmap, inspect, pipeline.

Exit codes: 0 success, 1 user error (bad flags, missing files, invalid
configs), 2 internal error. Every command except ``inspect`` writes a
``run.json`` with the resolved configuration next to its output.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    AnomalyRejectedError,
    CheckpointMismatchError,
    ContractError,
    DegenerateGeometryError,
    InvalidConfigError,
    InvalidInputError,
    RangeError,
    ShapeError,
    SignUndefinedError,
    UndefinedMetricError,
)

log = logging.getLogger("artik")

USER_ERRORS = (
    InvalidInputError,
    InvalidConfigError,
    RangeError,
    DegenerateGeometryError,
    CheckpointMismatchError,
    UndefinedMetricError,
    SignUndefinedError,
    ShapeError,
    AnomalyRejectedError,
    FileNotFoundError,
)

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    def __init__(self, message, parser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


def _version_string():
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        git = rev.stdout.strip() if rev.returncode == 0 else "unknown"
    except (OSError, subprocess.SubprocessError):
        git = "unknown"
    return f"artik {__version__} (git {git})"


def _write_run(path, command, argv, resolved):
    record = {"command": command, "argv": list(argv), "version": _version_string(), "config": resolved}
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")


def _file_run_path(out):
    out = Path(out)
    return out.with_name(out.name + ".run.json")


def _existing(path, what):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


# -- model / train flags -----------------------------------------------------------

_MODEL_FLAGS = [
    ("--latent-dim", "latent_dim", int),
    ("--fourier-freqs", "fourier_freqs", int),
    ("--pe-freqs", "pe_freqs", int),
    ("--shape-width", "shape_width", int),
    ("--shape-layers", "shape_layers", int),
    ("--skip-layer", "skip_layer", int),
    ("--artic-width", "artic_width", int),
    ("--artic-layers", "artic_layers", int),
    ("--pose-width", "pose_width", int),
    ("--lambda-latent", "lambda_latent", float),
    ("--lambda-part", "lambda_part", float),
]

_TRAIN_FLAGS = [
    ("--epochs", "epochs", int),
    ("--lr", "lr", float),
    ("--batch-size", "batch_size", int),
    ("--batches-per-sample", "batches_per_sample", int),
    ("--checkpoint-every", "checkpoint_every", int),
]

_SWITCHES = [
    ("--no-pe", "use_pe"),
    ("--no-shape-latent", "use_shape_latent"),
    ("--no-pose", "use_pose"),
    ("--no-part-head", "use_part_head"),
    ("--no-clamp", "clamp"),
]


def _add_model_flags(p):
    g = p.add_argument_group("model / training")
    g.add_argument("--profile", default="desk", help="size profile: full, desk or smoke (default desk)")
    g.add_argument("--ablation", help="preset flag set: A0..A4 or full")
    for flag, dest, typ in _MODEL_FLAGS + _TRAIN_FLAGS:
        g.add_argument(flag, dest=dest, type=typ)
    for flag, dest in _SWITCHES:
        g.add_argument(flag, dest=dest, action="store_false", default=None)


def _overrides(args):
    model = {d: getattr(args, d) for _, d, _ in _MODEL_FLAGS if getattr(args, d) is not None}
    train = {d: getattr(args, d) for _, d, _ in _TRAIN_FLAGS if getattr(args, d) is not None}
    train.update({d: False for _, d in _SWITCHES if getattr(args, d) is False})
    return {"model": model, "train": train}


def _add_eval_flags(p):
    p.add_argument("--grid", dest="grid_size", type=int, help="articulation grid size (default from profile)")
    p.add_argument("--k-fraction", type=float, default=0.01)
    p.add_argument("--pose-points", type=int, help="points used in the pose search (default: profile)")


def _eval_settings(args, profile):
    from .pipeline import resolve_profile

    ev = dict(resolve_profile(profile)["eval"])
    if args.grid_size is not None:
        ev["grid_size"] = args.grid_size
    if args.pose_points is not None:
        ev["pose_points"] = args.pose_points
    ev["k_fraction"] = args.k_fraction
    return ev


# -- commands ------------------------------------------------------------------------

def cmd_generate(args, argv):
    from .datagen import generate_dataset
    from .pipeline import resolve_profile

    overrides = dict(resolve_profile(args.profile)["dataset"])
    for key in ("n_train", "n_seen", "n_unseen"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.kinds:
        overrides["kinds"] = args.kinds.split(",")
    if args.no_dense:
        overrides["save_dense"] = False
    out = Path(args.out)
    manifest = generate_dataset(args.category, out, args.seed, jobs=args.jobs, overrides=overrides)
    _write_run(out / "run.json", "generate", argv, {
        "category": args.category, "seed": args.seed, "jobs": args.jobs, "dataset": manifest.dataset,
    })
    print(f"wrote {len(manifest.entries)} samples to {out}")
    return 0


def cmd_train(args, argv):
    from .datagen import Manifest
    from .pipeline import resolve_profile
    from .spasdf import ABLATIONS, SpasdfConfig
    from .trainer import TrainConfig, train

    manifest = Manifest.load(_existing(args.manifest, "manifest"))
    prof = resolve_profile(args.profile, _overrides(args))
    tkw = dict(prof["train"], seed=args.seed)
    if args.ablation:
        if args.ablation not in ABLATIONS:
            raise InvalidConfigError(f"unknown ablation {args.ablation!r}; have {sorted(ABLATIONS)}")
        tkw.update(ABLATIONS[args.ablation])
    tcfg = TrainConfig(**tkw)
    mcfg = SpasdfConfig(**prof["model"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = args.log or out.with_suffix(".loss.csv")
    res = train(manifest, mcfg, tcfg, out=out, log_path=log_path, category=args.category)
    _write_run(_file_run_path(out), "train", argv, {
        "manifest": str(args.manifest), "category": args.category, "model": res.model.cfg.to_dict(),
        "train": tcfg.to_dict(), "loss_log": str(log_path),
    })
    print(f"trained {tcfg.epochs} epochs, final loss {res.history[-1][4]:.6f}; checkpoint {out}")
    return 0


def cmd_eval(args, argv):
    from .datagen import Manifest
    from .detector import evaluate
    from .spasdf import SpasdfModel

    model = SpasdfModel.load(_existing(args.checkpoint, "checkpoint"))
    manifest = Manifest.load(_existing(args.manifest, "manifest"))
    ev = _eval_settings(args, args.profile)
    rep = evaluate(model, manifest, args.split, include_normal_points=args.include_normal_points,
                   seed=args.seed, jobs=args.jobs, **ev)
    report = Path(args.report)
    report.parent.mkdir(parents=True, exist_ok=True)
    rep.save(report, args.csv or report.with_suffix(".csv"))
    _write_run(_file_run_path(report), "eval", argv, {
        "checkpoint": str(args.checkpoint), "manifest": str(args.manifest), "split": args.split,
        "include_normal_points": args.include_normal_points, **ev,
    })
    print(f"{args.split}: point AUROC {rep.pt_auroc:.4f}, object AUROC {rep.obj_auroc:.4f}")
    return 0


def cmd_heatmap(args, argv):
    from .datagen import LabeledPointCloud
    from .detector import detect, write_heatmap
    from .spasdf import SpasdfModel

    model = SpasdfModel.load(_existing(args.checkpoint, "checkpoint"))
    cloud = LabeledPointCloud.load(_existing(args.cloud, "point cloud"))
    ev = _eval_settings(args, args.profile)
    res = detect(model, cloud.points, ev["grid_size"], ev["k_fraction"], ev["pose_points"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_heatmap(out, cloud.points, res.point_scores)
    _write_run(_file_run_path(out), "heatmap", argv, {
        "checkpoint": str(args.checkpoint), "cloud": str(args.cloud), **ev,
        "psi_star": res.psi_star, "object_score": res.object_score,
    })
    print(f"psi* = {res.psi_star:.4f}, object score {res.object_score:.6f}; wrote {out}")
    return 0


def inspect_path(path):
    """Human-readable description of any artik artifact."""
    from .datagen import LabeledPointCloud, Manifest, SdfTupleSet
    from .mesh.io import read_ply
    from .tensor import load_checkpoint

    p = _existing(path, "file")
    lines = []
    if p.is_dir() or p.suffix == ".json" and p.name != "normalization.json":
        m = Manifest.load(p)
        lines.append(f"manifest: category {m.category}, seed {m.seed}, {len(m.entries)} entries")
        for split in ("train", "seen", "unseen"):
            es = m.select(split)
            normal = sum(not e.abnormal for e in es)
            files = [f for e in es for f in (e.cloud, e.sdf, e.dense) if f]
            present = sum((m.root / f).exists() for f in files)
            lines.append(f"  {split}: {len(es)} samples ({normal} normal, {len(es) - normal} abnormal), "
                         f"{present}/{len(files)} files present")
    elif p.name == "normalization.json":
        lines.append(f"normalization: {json.loads(p.read_text())}")
    elif p.suffix == ".asdf":
        s = SdfTupleSet.load(p)
        lines.append(f"sdf tuples: {len(s)} records, sdf range [{s.sdf.min():.5f}, {s.sdf.max():.5f}], "
                     f"parts {np.bincount(s.part_ids).tolist()}")
    elif p.suffix == ".ply":
        ply = read_ply(p)
        props = {k: len(next(iter(e.data.values()))) if e.data else 0 for k, e in ply.elements.items()}
        lines.append(f"ply: elements {props}")
        names = list(ply.elements["vertex"].data)
        lines.append(f"  vertex properties: {names}")
        if {"x", "y", "z", "part_id"} <= set(names) and "score" not in names and any(
            c.startswith("artik category=") for c in ply.comments
        ):
            c = LabeledPointCloud.load(p)
            lines.append(f"  cloud: category {c.category}, split {c.split}, psi {c.psi}, "
                         f"abnormal {c.is_abnormal}, kind {c.kind}")
            if c.is_abnormal:
                lines.append(f"  anomalous points: {int(c.anomaly_labels.sum())}")
    else:
        params, meta = load_checkpoint(p)
        total = sum(v.size for v in params.values())
        lines.append(f"checkpoint: {len(params)} tensors, {total} values, epoch {meta.get('epoch')}, "
                     f"category {meta.get('category')}")
    return "\n".join(lines)


def cmd_inspect(args, argv):
    print(inspect_path(args.path))
    return 0


def cmd_pipeline(args, argv):
    from .pipeline import run_pipeline

    out = Path(args.out)
    summary = run_pipeline(args.category, args.seed, out, profile=args.profile, overrides=_overrides(args),
                           ablation=args.ablation, jobs=args.jobs, manifest=args.manifest)
    _write_run(out / "run.json", "pipeline", argv, {
        "category": args.category, "seed": args.seed, "profile": args.profile, "meta": summary["meta"],
    })
    print(json.dumps({k: summary[k] for k in ("Seen-Pt", "Seen-Obj", "Unseen-Pt", "Unseen-Obj")}, indent=2))
    return 0


def build_parser():
    p = _Parser(prog="artik", description="Pose-aware anomaly detection on articulated toy objects.")
    p.add_argument("--version", action="version", version=_version_string())
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a dataset")
    g.add_argument("--category", required=True, help="builtin:<name>, a builtin name, or a category JSON")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--profile", default="desk")
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-seen", type=int)
    g.add_argument("--n-unseen", type=int)
    g.add_argument("--kinds", help="comma-separated anomaly kinds")
    g.add_argument("--no-dense", action="store_true", help="skip the dense abnormal clouds")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model on the train split")
    t.add_argument("--manifest", required=True)
    t.add_argument("--category")
    t.add_argument("--seed", required=True, type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--log", help="loss CSV (default <out>.loss.csv)")
    _add_model_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a test split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--split", required=True, choices=["seen", "unseen"])
    e.add_argument("--report", required=True)
    e.add_argument("--csv")
    e.add_argument("--include-normal-points", action="store_true")
    e.add_argument("--profile", default="desk")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=int, default=1)
    _add_eval_flags(e)
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("heatmap", help="write per-point scores of one cloud as a colored PLY")
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--cloud", required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--profile", default="desk")
    _add_eval_flags(h)
    h.set_defaults(func=cmd_heatmap)

    i = sub.add_parser("inspect", help="describe a manifest, cloud, SDF file or checkpoint")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)

    pl = sub.add_parser("pipeline", help="generate, train and evaluate end to end")
    pl.add_argument("--category", default="builtin:hinge")
    pl.add_argument("--seed", required=True, type=int)
    pl.add_argument("--out", required=True)
    pl.add_argument("--jobs", type=int, default=1)
    pl.add_argument("--manifest", help="reuse an existing dataset")
    _add_model_flags(pl)
    pl.set_defaults(func=cmd_pipeline)
    return p


def _configure_logging():
    level = os.environ.get("ARTIK_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"artik: error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, argv)
    except USER_ERRORS as exc:
        print(f"artik {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"artik {args.command}: internal contract violation: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        from .pipeline import PipelineError

        if isinstance(exc, PipelineError) and isinstance(exc.cause, USER_ERRORS):
            print(f"artik {args.command}: {exc}", file=sys.stderr)
            return 1
        print(f"artik {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if log.isEnabledFor(logging.DEBUG):
            traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
