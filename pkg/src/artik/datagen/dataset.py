"""Split planning, the dataset manifest, and whole-dataset generation."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import AnomalyRejectedError, InvalidConfigError, InvalidInputError
from ..kinematics import pose_model
from ..mesh.normalization import NormalizationParams, fit_normalization
from ..rng import rng_for
from .anomaly import AnomalySpec, sample_anomaly_spec
from .categories import check_parts_disjoint, resolve_category
from .generate import generate_abnormal, generate_normal
from .records import DenseCloud, LabeledPointCloud, SdfTupleSet

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "artik-manifest"
MANIFEST_VERSION = 1
MAX_SPEC_ATTEMPTS = 25


@dataclass
class ManifestEntry:
    id: str
    split: str
    psi: float
    abnormal: bool
    cloud: str
    kind: str | None = None
    sdf: str | None = None
    sdf_counts: dict | None = None
    dense: str | None = None
    anomaly: dict | None = None
    positives: int | None = None

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Manifest:
    category: str
    seed: int
    joint: dict
    train_interval: list
    dataset: dict
    entries: list = field(default_factory=list)
    normalization: str = "normalization.json"
    category_ref: str | None = None
    part_count: int = 2
    root: Path | None = field(default=None, compare=False, repr=False)

    def to_dict(self):
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "category": self.category,
            "category_ref": self.category_ref,
            "part_count": self.part_count,
            "seed": self.seed,
            "joint": self.joint,
            "train_interval": list(self.train_interval),
            "dataset": self.dataset,
            "normalization": self.normalization,
            "entries": [asdict(e) for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d, root=None):
        if d.get("format") != MANIFEST_FORMAT:
            raise InvalidInputError("not an artik manifest")
        if d.get("version") != MANIFEST_VERSION:
            raise InvalidInputError(f"unsupported manifest version {d.get('version')}")
        return cls(
            category=d["category"],
            category_ref=d.get("category_ref"),
            part_count=d["part_count"],
            seed=d["seed"],
            joint=d["joint"],
            train_interval=list(d["train_interval"]),
            dataset=d["dataset"],
            normalization=d["normalization"],
            entries=[ManifestEntry.from_dict(e) for e in d["entries"]],
            root=root,
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_dict(d, root=path.parent)

    def select(self, split=None, abnormal=None):
        return [
            e for e in self.entries
            if (split is None or e.split == split) and (abnormal is None or e.abnormal == abnormal)
        ]

    def _path(self, rel):
        return (self.root or Path(".")) / rel

    def load_cloud(self, entry):
        return LabeledPointCloud.load(self._path(entry.cloud))

    def load_sdf(self, entry):
        return SdfTupleSet.load(self._path(entry.sdf), psi=entry.psi, counts=entry.sdf_counts)

    def load_dense(self, entry):
        return DenseCloud.load(self._path(entry.dense))

    def load_normalization(self):
        return NormalizationParams.load(self._path(self.normalization))


def _draw_excluding(rng, lo, hi, n, excluded, open_low=False):
    out = []
    excluded = set(float(x) for x in excluded)
    while len(out) < n:
        v = float(rng.uniform(lo, hi))
        if v in excluded or (open_low and v == lo):
            continue
        out.append(v)
    return sorted(out)


def build_splits(category_cfg, seed):
    """Plan psis and file names for all three splits.

    Train psis form a uniform grid on the lower ``train_fraction`` of the
    joint range. Seen-test psis are uniform draws inside that interval that
    miss the grid; unseen-test psis are uniform draws from the rest.
    """
    joint = category_cfg["joint"]
    ds = category_cfg["dataset"]
    lo, hi = float(joint["range_min"]), float(joint["range_max"])
    n_train = int(ds["n_train"])
    frac = float(ds["train_fraction"])
    if not 0 < frac < 1:
        raise InvalidConfigError(f"train_fraction must lie in (0, 1), got {frac}")
    if n_train < 2:
        raise InvalidConfigError("need at least two training poses")
    top = lo + frac * (hi - lo)
    grid = np.linspace(lo, top, n_train)
    if not np.all(np.diff(grid) > 1e-9 * max(1.0, abs(hi), abs(lo))):
        raise InvalidConfigError(f"joint range [{lo}, {hi}] is too narrow for {n_train} training poses")
    name = category_cfg["name"]
    rng = rng_for(seed, name, "splits")
    seen = _draw_excluding(rng, lo, top, int(ds["n_seen"]), grid)
    unseen = _draw_excluding(rng, top, hi, int(ds["n_unseen"]), grid, open_low=True)

    entries = []
    for i, psi in enumerate(grid):
        sid = f"train_{i:03d}"
        entries.append(ManifestEntry(sid, "train", float(psi), False, f"train/{sid}.ply", sdf=f"train/{sid}.asdf"))
    for split, psis in (("seen", seen), ("unseen", unseen)):
        for i, psi in enumerate(psis):
            sid = f"{split}_{i:03d}"
            entries.append(ManifestEntry(f"{sid}_normal", split, psi, False, f"{split}/{sid}_normal.ply"))
            for kind in ds["kinds"]:
                dense = f"{split}/{sid}_{kind}.dense.ply" if ds.get("save_dense", True) else None
                entries.append(
                    ManifestEntry(f"{sid}_{kind}", split, psi, True, f"{split}/{sid}_{kind}.ply", kind=kind, dense=dense)
                )
    return Manifest(
        category=name,
        seed=int(seed),
        joint=dict(joint),
        train_interval=[lo, float(top)],
        dataset=dict(ds),
        entries=entries,
    )


def _sample_index(entry):
    return int(entry.id.split("_")[1])


def _make_sample(model, entry, norm, seed, ds, out):
    """Generate and write one manifest entry; returns the completed entry."""
    name = model.name
    idx = _sample_index(entry)
    if not entry.abnormal:
        rng = rng_for(seed, name, entry.split, idx, "normal")
        cloud, tuples = generate_normal(
            model, entry.psi, norm, rng, split=entry.split, with_sdf=entry.sdf is not None,
            n_points=int(ds["points_per_cloud"]), sdf_tuples=int(ds["sdf_tuples"]),
        )
        cloud.save(out / entry.cloud)
        if tuples is not None:
            tuples.save(out / entry.sdf)
            entry = replace(entry, sdf_counts=dict(tuples.counts))
        return entry
    for attempt in range(MAX_SPEC_ATTEMPTS):
        spec_rng = rng_for(seed, name, entry.split, idx, entry.kind, "spec", attempt)
        spec = sample_anomaly_spec(model.parts, entry.kind, spec_rng, ds["anomaly_radius"], ds["anomaly_magnitude"])
        try:
            cloud, dense = generate_abnormal(
                model, entry.psi, spec, norm, rng_for(seed, name, entry.split, idx, entry.kind, "sample", attempt),
                split=entry.split, n_points=int(ds["points_per_cloud"]), n_dense=int(ds["dense_points"]),
            )
        except AnomalyRejectedError as exc:
            log.debug("%s attempt %d rejected: %s", entry.id, attempt, exc)
            continue
        cloud.save(out / entry.cloud)
        if entry.dense is not None:
            dense.save(out / entry.dense)
        return replace(entry, anomaly=spec.to_dict(), positives=int(cloud.anomaly_labels.sum()))
    raise AnomalyRejectedError(f"{entry.id}: no valid defect after {MAX_SPEC_ATTEMPTS} attempts")


def _job(args):
    ref, entry, norm_dict, seed, ds, out = args
    model, _ = resolve_category(ref)
    return _make_sample(model, entry, NormalizationParams.from_dict(norm_dict), seed, ds, Path(out))


def fit_category_normalization(model, train_psis):
    return fit_normalization([np.concatenate([p.vertices for p in pose_model(model, psi)]) for psi in train_psis])


def generate_dataset(category, out, seed, jobs=1, overrides=None):
    """Write a full dataset for ``category`` under ``out``; returns the manifest.

    ``category`` is a builtin name or a category JSON path. ``overrides``
    patches the dataset section (sample counts, kinds, ...).
    """
    model, cfg = resolve_category(category)
    cfg["dataset"].update(overrides or {})
    manifest = build_splits(cfg, seed)
    manifest.category_ref = str(category)
    manifest.part_count = model.part_count
    out = Path(out)
    for split in ("train", "seen", "unseen"):
        (out / split).mkdir(parents=True, exist_ok=True)
    check_parts_disjoint(model, sorted({e.psi for e in manifest.entries}))
    norm = fit_category_normalization(model, [e.psi for e in manifest.select("train")])
    norm.save(out / manifest.normalization)

    ds = manifest.dataset
    if jobs == 0:
        jobs = os.cpu_count() or 1
    if jobs > 1:
        tasks = [(str(category), e, norm.to_dict(), seed, ds, str(out)) for e in manifest.entries]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_job, tasks))
    else:
        done = []
        for i, e in enumerate(manifest.entries):
            done.append(_make_sample(model, e, norm, seed, ds, out))
            log.info("generated %s (%d/%d)", e.id, i + 1, len(manifest.entries))
    manifest.entries = done
    manifest.root = out
    manifest.save(out / "manifest.json")
    return manifest


__all__ = [
    "Manifest",
    "ManifestEntry",
    "AnomalySpec",
    "build_splits",
    "generate_dataset",
    "fit_category_normalization",
]
