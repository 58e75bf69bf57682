"""generate -> train -> eval seen -> eval unseen, with named size profiles."""
from __future__ import annotations

import copy
import json
import logging
from pathlib import Path

from .datagen import Manifest, generate_dataset
from .detector import evaluate
from .errors import ArtikError, InvalidConfigError
from .spasdf import ABLATIONS, SpasdfConfig
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)

HEADLINE = ("Seen-Pt", "Seen-Obj", "Unseen-Pt", "Unseen-Obj")

# "full" uses the library defaults (hours per category). "desk" is the
# single-CPU setting the toy benchmark runs with. "smoke" only checks plumbing.
PROFILES = {
    "full": {
        "dataset": {},
        "model": {},
        "train": {"epochs": 800, "lr": 1e-4, "batch_size": 4096},
        "eval": {"grid_size": 256, "pose_points": None},
    },
    "desk": {
        "dataset": {},
        "model": {"latent_dim": 32, "fourier_freqs": 4, "pe_freqs": 6, "shape_width": 128,
                  "artic_width": 128, "pose_width": 32},
        "train": {"epochs": 200, "lr": 5e-4, "batch_size": 2048},
        "eval": {"grid_size": 64, "pose_points": 4096},
    },
    "smoke": {
        "dataset": {"n_train": 4, "n_seen": 2, "n_unseen": 2, "kinds": ["dent", "bulge"],
                    "points_per_cloud": 2048, "dense_points": 8192, "sdf_tuples": 3000},
        "model": {"latent_dim": 4, "fourier_freqs": 2, "pe_freqs": 2, "shape_width": 16, "shape_layers": 3,
                  "skip_layer": 1, "artic_width": 16, "artic_layers": 2, "pose_width": 8},
        "train": {"epochs": 3, "lr": 1e-3, "batch_size": 512, "checkpoint_every": 2},
        "eval": {"grid_size": 16, "pose_points": 512},
    },
}


class PipelineError(ArtikError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def resolve_profile(profile, overrides=None):
    if profile not in PROFILES:
        raise InvalidConfigError(f"unknown profile {profile!r}; have {sorted(PROFILES)}")
    prof = copy.deepcopy(PROFILES[profile])
    for section, values in (overrides or {}).items():
        if section not in prof:
            raise InvalidConfigError(f"unknown override section {section!r}")
        prof[section].update(values)
    return prof


def _stage(name, fn, *args, **kwargs):
    log.info("pipeline stage: %s", name)
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:  # tag and re-raise
        raise PipelineError(name, exc) from exc


def run_pipeline(category, seed, outdir, profile="desk", overrides=None, ablation=None, jobs=1, manifest=None):
    """Run every stage under ``outdir``; returns the summary dict.

    ``manifest`` reuses an already generated dataset instead of generating.
    """
    prof = resolve_profile(profile, overrides)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    if manifest is None:
        manifest = _stage("generate", generate_dataset, category, out / "data", seed, jobs=jobs,
                          overrides=prof["dataset"])
    elif not isinstance(manifest, Manifest):
        manifest = _stage("generate", Manifest.load, manifest)
    train_kwargs = dict(prof["train"], seed=seed)
    if ablation is not None:
        if ablation not in ABLATIONS:
            raise InvalidConfigError(f"unknown ablation {ablation!r}; have {sorted(ABLATIONS)}")
        train_kwargs.update(ABLATIONS[ablation])
    tcfg = TrainConfig(**train_kwargs)
    mcfg = SpasdfConfig(**prof["model"])
    result = _stage("train", train, manifest, mcfg, tcfg, out=out / "model.bin", log_path=out / "loss.csv")
    reports = {}
    for split in ("seen", "unseen"):
        rep = _stage(f"eval-{split}", evaluate, result.model, manifest, split, seed=seed, jobs=jobs, **prof["eval"])
        rep.save(out / f"eval_{split}.json", out / f"eval_{split}.csv")
        reports[split] = rep
    summary = {
        "Seen-Pt": reports["seen"].pt_auroc,
        "Seen-Obj": reports["seen"].obj_auroc,
        "Unseen-Pt": reports["unseen"].pt_auroc,
        "Unseen-Obj": reports["unseen"].obj_auroc,
        "meta": {
            "category": manifest.category,
            "seed": seed,
            "profile": profile,
            "ablation": ablation,
            "model": result.model.cfg.to_dict(),
            "train": tcfg.to_dict(),
            "eval": prof["eval"],
            "samples": {s: len(manifest.select(s)) for s in ("train", "seen", "unseen")},
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
