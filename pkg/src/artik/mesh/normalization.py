from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGeometryError, InvalidInputError


@dataclass(frozen=True)
class NormalizationParams:
    """Category-level frame: ``x' = (x - center) / scale``."""

    center: tuple
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DegenerateGeometryError(f"normalization scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "scale", float(self.scale))

    def to_dict(self):
        return {"center": list(self.center), "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        return cls(center=tuple(d["center"]), scale=d["scale"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_normalization(point_sets):
    """Mean of all points as center, max-abs centered coordinate as scale."""
    sets = [np.asarray(p, dtype=np.float64).reshape(-1, 3) for p in point_sets]
    sets = [p for p in sets if len(p)]
    if not sets:
        raise InvalidInputError("no points to fit normalization on")
    total = sum(len(p) for p in sets)
    center = sum(p.sum(axis=0) for p in sets) / total
    scale = max(float(np.abs(p - center).max()) for p in sets)
    if scale == 0:
        raise DegenerateGeometryError("all points coincide; scale is zero")
    return NormalizationParams(tuple(center), scale)


def normalize(points, params):
    return (np.asarray(points, dtype=np.float64) - np.asarray(params.center)) / params.scale


def denormalize(points, params):
    return np.asarray(points, dtype=np.float64) * params.scale + np.asarray(params.center)
