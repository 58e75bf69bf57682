"""Articulation search, point scoring, and AUROC evaluation."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import CheckpointMismatchError, InvalidInputError, UndefinedMetricError
from .mesh.io import write_ply
from .rng import rng_for
from .spasdf import sdf_from_features, shape_features

GRID_SIZE = 256
K_FRACTION = 0.01
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 20


@dataclass
class AnomalyResult:
    psi_star: float
    point_scores: np.ndarray
    object_score: float
    energy_curve: list = field(default_factory=list)


class EnergyModel:
    """Caches the psi-independent features of one cloud for repeated queries."""

    def __init__(self, model, points):
        self.model = model
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        _, self.pre = shape_features(model.params, model.cfg, self.points)
        self._flat = None

    def sdf(self, psi):
        return sdf_from_features(self.model.params, self.model.cfg, self.pre, psi)

    def energy(self, psi):
        if not self.model.cfg.use_pose:
            if self._flat is None:
                self._flat = float(np.mean(np.abs(self.sdf(psi))))
            return self._flat
        return float(np.mean(np.abs(self.sdf(psi))))


def _golden(f, a, b):
    """Minimize ``f`` on [a, b]; returns (x, f(x))."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(_GOLDEN_ITERS):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def estimate_articulation(model, points, grid_size=GRID_SIZE, refine=True, energy=None):
    """Grid argmin of the mean absolute SDF, then golden-section refinement.

    The refined value replaces the grid minimum only when its energy is
    strictly lower, so ``E(psi*)`` never exceeds any grid energy. Ties on the
    grid go to the smaller psi.
    """
    em = energy if energy is not None else EnergyModel(model, points)
    lo, hi = model.cfg.psi_range
    grid = np.linspace(lo, hi, grid_size)
    curve = [(float(p), em.energy(p)) for p in grid]
    e = np.array([c[1] for c in curve])
    i = int(np.argmin(e))  # first minimum -> smaller psi on ties
    psi_star, e_star = float(grid[i]), float(e[i])
    flat = bool(np.all(e == e[0]))
    if refine and grid_size > 1 and not flat:
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
        x, fx = _golden(em.energy, a, b)
        if fx < e_star:
            psi_star, e_star = float(x), float(fx)
    return psi_star, curve


def top_k_mean(scores, k):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    k = int(min(max(k, 1), len(s)))
    return float(np.mean(np.partition(s, len(s) - k)[len(s) - k:]))


def object_score(point_scores, k_fraction=K_FRACTION):
    n = len(point_scores)
    return top_k_mean(point_scores, math.ceil(k_fraction * n))


def score(model, points, psi_star, k_fraction=K_FRACTION, energy=None):
    em = energy if energy is not None else EnergyModel(model, points)
    s = np.abs(em.sdf(psi_star))
    return AnomalyResult(float(psi_star), s, object_score(s, k_fraction))


def detect(model, points, grid_size=GRID_SIZE, k_fraction=K_FRACTION, pose_points=None, seed=0):
    """Pose search then scoring of every point.

    ``pose_points`` caps how many (deterministically chosen) points enter the
    energy during the pose search; scoring always uses the whole cloud.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    full = EnergyModel(model, pts)
    search = full
    if pose_points is not None and pose_points < len(pts):
        idx = np.sort(rng_for(seed, "pose-subset").choice(len(pts), size=pose_points, replace=False))
        search = EnergyModel.__new__(EnergyModel)
        search.model, search.points, search.pre, search._flat = model, pts[idx], full.pre[idx], None
    psi_star, curve = estimate_articulation(model, pts, grid_size, energy=search)
    res = score(model, pts, psi_star, k_fraction, energy=full)
    res.energy_curve = curve
    return res


def auroc(scores, labels):
    """Mann-Whitney AUROC with tied scores counted as one half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if len(s) != len(y):
        raise InvalidInputError(f"{len(s)} scores but {len(y)} labels")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both positive and negative labels")
    ranks = rankdata(s)  # average ranks for ties
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class EvalReport:
    split: str
    pt_auroc: float
    obj_auroc: float
    pt_auroc_mean: float
    samples: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "split": self.split,
            "pt_auroc": self.pt_auroc,
            "obj_auroc": self.obj_auroc,
            "pt_auroc_mean": self.pt_auroc_mean,
            "settings": self.settings,
            "samples": self.samples,
        }

    def save(self, json_path, csv_path=None):
        Path(json_path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        if csv_path:
            cols = ["id", "psi", "psi_star", "abnormal", "kind", "object_score", "positives"]
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                for row in self.samples:
                    w.writerow([row[c] for c in cols])


def check_compatible(model, manifest):
    cat = model.meta.get("category")
    if cat is not None and cat != manifest.category:
        raise CheckpointMismatchError(f"checkpoint trained on {cat!r}, manifest holds {manifest.category!r}")
    rng_ = (float(manifest.joint["range_min"]), float(manifest.joint["range_max"]))
    if tuple(model.cfg.psi_range) != rng_:
        raise CheckpointMismatchError(f"checkpoint psi range {model.cfg.psi_range} differs from joint range {rng_}")


def _score_entry(args):
    model, manifest, e, grid_size, k_fraction, pose_points, seed = args
    cloud = manifest.load_cloud(e)
    res = detect(model, cloud.points, grid_size, k_fraction, pose_points, seed)
    labels = cloud.anomaly_labels if cloud.is_abnormal else np.zeros(len(cloud), dtype=np.uint8)
    row = {
        "id": e.id,
        "psi": e.psi,
        "psi_star": res.psi_star,
        "abnormal": bool(cloud.is_abnormal),
        "kind": e.kind,
        "object_score": res.object_score,
        "positives": int(labels.sum()),
    }
    return row, res.point_scores, labels


def evaluate(model, manifest, split, grid_size=GRID_SIZE, k_fraction=K_FRACTION, include_normal_points=False,
             pose_points=None, seed=0, jobs=1):
    """Score every sample of ``split`` and compute point and object AUROC.

    Point AUROC pools the points of all abnormal samples (plus normal ones
    when ``include_normal_points``); ``pt_auroc_mean`` averages per sample.
    """
    if split not in ("seen", "unseen"):
        raise InvalidInputError(f"evaluation split must be seen or unseen, got {split!r}")
    check_compatible(model, manifest)
    entries = manifest.select(split)
    if not entries:
        raise InvalidInputError(f"manifest has no {split} samples")
    tasks = [(model, manifest, e, grid_size, k_fraction, pose_points, seed) for e in entries]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_entry, tasks))
    else:
        results = [_score_entry(t) for t in tasks]
    rows, pt_scores, pt_labels, per_sample = [], [], [], []
    for row, scores, labels in results:
        rows.append(row)
        if row["abnormal"] or include_normal_points:
            pt_scores.append(scores)
            pt_labels.append(labels)
        if row["abnormal"] and 0 < labels.sum() < len(labels):
            per_sample.append(auroc(scores, labels))
    obj = auroc([r["object_score"] for r in rows], [r["abnormal"] for r in rows])
    pt = auroc(np.concatenate(pt_scores), np.concatenate(pt_labels)) if pt_scores else float("nan")
    settings = {
        "grid_size": grid_size,
        "k_fraction": k_fraction,
        "include_normal_points": include_normal_points,
        "pose_points": pose_points,
    }
    return EvalReport(split, pt, obj, float(np.mean(per_sample)) if per_sample else float("nan"), rows, settings)


# -- heatmap -------------------------------------------------------------------------

_STOPS = np.array([
    [0.0, 48, 18, 59],
    [0.25, 70, 134, 251],
    [0.5, 27, 229, 181],
    [0.75, 250, 186, 57],
    [1.0, 122, 4, 3],
])


def colormap(values):
    """Scores in [0, 1] to 8-bit RGB along a dark-blue to dark-red ramp."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    rgb = np.stack([np.interp(v, _STOPS[:, 0], _STOPS[:, c]) for c in (1, 2, 3)], axis=1)
    return np.rint(rgb).astype(np.uint8)


def write_heatmap(path, points, scores):
    s = np.asarray(scores, dtype=np.float64)
    span = s.max() - s.min()
    rgb = colormap((s - s.min()) / span if span > 0 else np.zeros_like(s))
    p = np.asarray(points, dtype=np.float32)
    write_ply(path, {
        "x": p[:, 0], "y": p[:, 1], "z": p[:, 2],
        "score": s.astype(np.float32),
        "red": rgb[:, 0], "green": rgb[:, 1], "blue": rgb[:, 2],
    }, comments=["artik heatmap=1"])
