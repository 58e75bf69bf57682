from .trimesh import TriangleMesh, merge_meshes
from .sampling import sample_surface, points_from_barycentric
from .normalization import NormalizationParams, fit_normalization, normalize, denormalize
from .query import (
    closest_points,
    unsigned_distance,
    signed_distance,
    inside_by_parity,
    nearest_part,
    nearest_label,
    LabelIndex,
)

__all__ = [
    "TriangleMesh",
    "merge_meshes",
    "sample_surface",
    "points_from_barycentric",
    "NormalizationParams",
    "fit_normalization",
    "normalize",
    "denormalize",
    "closest_points",
    "unsigned_distance",
    "signed_distance",
    "inside_by_parity",
    "nearest_part",
    "nearest_label",
    "LabelIndex",
]
