"""Single-DoF joints and the rigid motions they induce on part meshes.

Revolute ranges are in degrees everywhere outside this module;
:func:`angle_to_radians` is the only conversion point.
Prismatic values are raw model units of the source meshes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, RangeError

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


def angle_to_radians(degrees):
    return np.deg2rad(degrees)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be a proper orthonormal matrix")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @property
    def is_identity(self):
        return bool(np.array_equal(self.rotation, np.eye(3)) and not self.translation.any())

    def apply(self, points):
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def apply_vectors(self, vectors):
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)


def rotation_about_axis(axis, radians):
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=np.float64)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(radians) * kx + (1.0 - np.cos(radians)) * (kx @ kx)


@dataclass(frozen=True)
class JointSpec:
    kind: str
    axis: tuple
    range_min: float
    range_max: float
    moving_part_ids: frozenset
    origin: tuple = (0.0, 0.0, 0.0)
    name: str = "joint"

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise InvalidConfigError(f"joint kind must be revolute or prismatic, got {self.kind!r}")
        axis = np.asarray(self.axis, dtype=np.float64)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise InvalidConfigError(f"joint axis must be a unit 3-vector, got {self.axis}")
        if not self.range_min < self.range_max:
            raise InvalidConfigError(f"joint range [{self.range_min}, {self.range_max}] is empty")
        if not self.moving_part_ids:
            raise InvalidConfigError("joint moves no parts")
        object.__setattr__(self, "axis", tuple(float(a) for a in axis))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "moving_part_ids", frozenset(int(i) for i in self.moving_part_ids))
        object.__setattr__(self, "range_min", float(self.range_min))
        object.__setattr__(self, "range_max", float(self.range_max))

    @property
    def span(self):
        return self.range_max - self.range_min

    def check(self, psi):
        if not self.range_min <= psi <= self.range_max:
            raise RangeError(
                f"{self.name}: value {psi} outside joint range [{self.range_min}, {self.range_max}]"
            )

    def to_dict(self):
        return {
            "kind": self.kind,
            "axis": list(self.axis),
            "origin": list(self.origin),
            "range_min": self.range_min,
            "range_max": self.range_max,
            "moving_part_ids": sorted(self.moving_part_ids),
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d):
        axis = np.asarray(d["axis"], dtype=np.float64)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise InvalidConfigError("joint axis is zero")
        return cls(
            kind=d["kind"],
            axis=tuple(axis / norm),
            origin=tuple(d.get("origin", (0.0, 0.0, 0.0))),
            range_min=d["range_min"],
            range_max=d["range_max"],
            moving_part_ids=frozenset(d["moving_part_ids"]),
            name=d.get("name", "joint"),
        )


def transform_for(spec, psi):
    spec.check(psi)
    axis = np.asarray(spec.axis)
    if spec.kind == PRISMATIC:
        return RigidTransform(np.eye(3), psi * axis)
    rot = rotation_about_axis(axis, angle_to_radians(psi))
    origin = np.asarray(spec.origin)
    return RigidTransform(rot, origin - rot @ origin)


@dataclass(frozen=True)
class ArticulatedModel:
    name: str
    parts: tuple
    joint: JointSpec

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        n = len(self.parts)
        ids = self.joint.moving_part_ids
        if not all(0 <= i < n for i in ids) or len(ids) >= n:
            raise InvalidConfigError(
                f"moving_part_ids {sorted(ids)} must be a nonempty strict subset of parts 0..{n - 1}"
            )

    @property
    def part_count(self):
        return len(self.parts)

    def part_transform(self, part, psi):
        if part in self.joint.moving_part_ids:
            return transform_for(self.joint, psi)
        self.joint.check(psi)
        return RigidTransform.identity()


def pose_model(model, psi):
    """Posed copies of every part; static parts are returned unchanged."""
    t = transform_for(model.joint, psi)
    posed = []
    for i, part in enumerate(model.parts):
        if i in model.joint.moving_part_ids and not t.is_identity:
            posed.append(part.transformed(t.rotation, t.translation))
        else:
            posed.append(part.copy())
    return posed


def load_category_config(path):
    """Read a category JSON: {name, parts: [mesh paths], joint: {...}}.

    Mesh paths are resolved relative to the config file.
    """
    from .mesh.io import read_mesh

    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"cannot read category config {path}: {exc}") from exc
    for key in ("name", "parts", "joint"):
        if key not in cfg:
            raise InvalidConfigError(f"category config {path} lacks {key!r}")
    parts = [read_mesh(path.parent / p) for p in cfg["parts"]]
    joint = cfg["joint"]
    joint.setdefault("name", f"{cfg['name']}-joint")
    model = ArticulatedModel(cfg["name"], parts, JointSpec.from_dict(joint))
    return model, cfg


__all__ = [
    "RigidTransform",
    "JointSpec",
    "ArticulatedModel",
    "transform_for",
    "pose_model",
    "rotation_about_axis",
    "angle_to_radians",
    "load_category_config",
    "REVOLUTE",
    "PRISMATIC",
]
