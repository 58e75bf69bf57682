"""Built-in toy categories and category resolution.

Toy parts are voxel solids, so their surfaces carry a regular triangle grid
that local deformations can bend. Units follow the articulation tables the
categories imitate: the hinge and laptop in arbitrary units with angles in
degrees, the drawer in units where the shell is 100 long.
"""
from __future__ import annotations

import copy

import numpy as np

from ..errors import InvalidConfigError
from ..kinematics import ArticulatedModel, JointSpec, load_category_config, pose_model
from ..mesh.primitives import box, voxel_solid

DATASET_DEFAULTS = {
    "n_train": 40,
    "n_seen": 20,
    "n_unseen": 20,
    "train_fraction": 0.7,
    "kinds": ["dent", "bulge", "fracture", "bend", "distortion", "missing"],
    "points_per_cloud": 16384,
    "dense_points": 100000,
    "sdf_tuples": 30000,
    "save_dense": True,
}


def _hinge():
    cell = 0.05
    static = box((0.06, -0.125, 0.0), (1.0, 0.125, 0.5), cell=cell)
    moving = box((0.06, -0.125, 0.56), (1.0, 0.125, 1.06), cell=cell)
    joint = JointSpec(
        kind="revolute", axis=(0.0, 0.0, 1.0), origin=(0.0, 0.0, 0.0),
        range_min=0.0, range_max=359.0, moving_part_ids=frozenset({1}), name="hinge-pin",
    )
    dataset = {"anomaly_radius": [0.15, 0.22], "anomaly_magnitude": [0.05, 0.08]}
    return ArticulatedModel("hinge", [static, moving], joint), dataset


def _drawer():
    cell = 5.0
    occ = np.ones((20, 18, 12), dtype=bool)
    occ[2:, 2:16, 2:10] = False  # cavity open towards +x
    shell = voxel_solid(occ, (0.0, 0.0, 0.0), cell)
    drawer = box((15.0, 15.0, 15.0), (95.0, 75.0, 45.0), cell=cell)
    joint = JointSpec(
        kind="prismatic", axis=(1.0, 0.0, 0.0), range_min=0.0, range_max=85.0,
        moving_part_ids=frozenset({1}), name="drawer-slide",
    )
    dataset = {"anomaly_radius": [12.0, 18.0], "anomaly_magnitude": [4.0, 7.0]}
    return ArticulatedModel("drawer", [shell, drawer], joint), dataset


def _laptop():
    cell = 1.0
    base = box((0.0, 0.0, 0.0), (30.0, 20.0, 2.0), cell=cell)
    screen = box((0.0, 0.0, 2.5), (30.0, 20.0, 4.5), cell=cell)
    joint = JointSpec(
        kind="revolute", axis=(0.0, 1.0, 0.0), origin=(30.5, 0.0, 2.25),
        range_min=0.0, range_max=120.0, moving_part_ids=frozenset({1}), name="laptop-hinge",
    )
    dataset = {"anomaly_radius": [3.0, 5.0], "anomaly_magnitude": [0.6, 0.9]}
    return ArticulatedModel("laptop", [base, screen], joint), dataset


BUILTINS = {"hinge": _hinge, "drawer": _drawer, "laptop": _laptop}


def builtin_category(name):
    if name not in BUILTINS:
        raise InvalidConfigError(f"unknown builtin category {name!r}; have {sorted(BUILTINS)}")
    model, dataset = BUILTINS[name]()
    cfg = {"name": model.name, "builtin": True, "joint": model.joint.to_dict()}
    cfg["dataset"] = {**copy.deepcopy(DATASET_DEFAULTS), **dataset}
    return model, cfg


def resolve_category(ref):
    """``builtin:<name>``, a bare builtin name, or a path to a category JSON."""
    ref = str(ref)
    name = ref.split(":", 1)[1] if ref.startswith("builtin:") else ref
    if name in BUILTINS:
        return builtin_category(name)
    if ref.startswith("builtin:"):
        raise InvalidConfigError(f"unknown builtin category {name!r}; have {sorted(BUILTINS)}")
    model, cfg = load_category_config(ref)
    dataset = {**copy.deepcopy(DATASET_DEFAULTS), **cfg.get("dataset", {})}
    if "anomaly_radius" not in dataset or "anomaly_magnitude" not in dataset:
        lo, hi = np.min([p.bounds[0] for p in model.parts], axis=0), np.max([p.bounds[1] for p in model.parts], axis=0)
        diag = float(np.linalg.norm(hi - lo))
        dataset.setdefault("anomaly_radius", [0.06 * diag, 0.1 * diag])
        dataset.setdefault("anomaly_magnitude", [0.02 * diag, 0.035 * diag])
    cfg["dataset"] = dataset
    return model, cfg


def check_parts_disjoint(model, psis):
    """Reject models whose parts overlap at any of the given poses.

    Stands in for Boolean cleanup of internal faces: parts must be closed
    and must neither cross each other's surfaces nor contain one another.
    """
    from ..mesh.query import inside_by_parity

    for psi in psis:
        parts = pose_model(model, psi)
        for i, a in enumerate(parts):
            if not a.is_watertight:
                raise InvalidConfigError(f"part {i} of {model.name} is not watertight")
            for j, b in enumerate(parts):
                if i == j:
                    continue
                e = np.unique(np.sort(np.concatenate([a.faces[:, [0, 1]], a.faces[:, [1, 2]], a.faces[:, [2, 0]]]), axis=1), axis=0)
                p0, p1 = a.vertices[e[:, 0]], a.vertices[e[:, 1]]
                seg, _, _ = b.bvh.intersect(p0, p1 - p0, t_min=0.0, t_max=1.0)
                if len(seg) or inside_by_parity(b, a.vertices[:1]).any():
                    raise InvalidConfigError(f"{model.name}: parts {i} and {j} intersect at psi={psi}")
