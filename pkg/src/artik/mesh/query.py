from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InvalidInputError, SignUndefinedError

# Five fixed, deliberately non-axis-aligned unit directions for the parity vote.
_RAW_DIRS = np.array(
    [
        [0.5773502691896258, 0.4082482904638631, 0.7071067811865476],
        [-0.3312368566474961, 0.8638932743624133, 0.3794290145735113],
        [0.2886751345948129, -0.6172133998483676, -0.7319250547113999],
        [-0.7453559924999299, -0.2981423969999720, 0.5962847939999439],
        [0.1230914909793327, 0.2461829819586655, -0.9613591021622262],
    ]
)
RAY_DIRECTIONS = _RAW_DIRS / np.linalg.norm(_RAW_DIRS, axis=1, keepdims=True)


def _as_points(points):
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    return pts.reshape(-1, 3), single


def closest_points(mesh, points):
    """(distance, face index, closest point) per query point."""
    pts, _ = _as_points(points)
    d2, tri, cp = mesh.bvh.closest(pts)
    return np.sqrt(d2), tri, cp


def unsigned_distance(mesh, points):
    pts, single = _as_points(points)
    d = np.sqrt(mesh.bvh.closest(pts)[0])
    return float(d[0]) if single else d


def inside_by_parity(mesh, points):
    """Majority vote over the parity of hits along five fixed rays."""
    pts, _ = _as_points(points)
    n = len(pts)
    k = len(RAY_DIRECTIONS)
    origins = np.repeat(pts, k, axis=0)
    dirs = np.tile(RAY_DIRECTIONS, (n, 1))
    ray, _, _ = mesh.bvh.intersect(origins, dirs, t_min=0.0)
    crossings = np.bincount(ray, minlength=n * k).reshape(n, k)
    odd = (crossings % 2 == 1).sum(axis=1)
    return odd > k // 2


def signed_distance(mesh, points):
    """Distance to the surface, negative inside. Requires a watertight mesh."""
    if not mesh.is_watertight:
        raise SignUndefinedError("signed distance needs a watertight mesh; use unsigned_distance")
    pts, single = _as_points(points)
    d = np.sqrt(mesh.bvh.closest(pts)[0])
    off = d > 0
    sign = np.ones(len(pts))
    if off.any():
        sign[off] = np.where(inside_by_parity(mesh, pts[off]), -1.0, 1.0)
    sd = sign * d
    return float(sd[0]) if single else sd


def nearest_part(points, part_meshes):
    """Index of the part mesh closest to each point; ties go to the lower index."""
    if len(part_meshes) == 0:
        raise InvalidInputError("need at least one part mesh")
    pts, single = _as_points(points)
    dist = np.stack([np.sqrt(m.bvh.closest(pts)[0]) for m in part_meshes], axis=1)
    # argmin returns the first minimum -> lowest index on exact ties
    idx = np.argmin(dist, axis=1)
    return int(idx[0]) if single else idx


class LabelIndex:
    """KD-tree over labeled reference points for nearest-label lookups."""

    TIE_CANDIDATES = 8

    def __init__(self, reference_points, reference_labels):
        ref = np.asarray(reference_points, dtype=np.float64).reshape(-1, 3)
        labels = np.asarray(reference_labels)
        if len(ref) == 0:
            raise InvalidInputError("reference set is empty")
        if len(labels) != len(ref):
            raise InvalidInputError("labels are not aligned with reference points")
        self.labels = labels
        self.tree = cKDTree(ref)
        self.k = min(self.TIE_CANDIDATES, len(ref))

    def query(self, points):
        pts, single = _as_points(points)
        d, idx = self.tree.query(pts, k=self.k)
        if self.k == 1:
            best = idx
        else:
            d = d.reshape(len(pts), self.k)
            idx = idx.reshape(len(pts), self.k)
            # among exact-distance ties prefer the lowest reference index
            tied = d == d[:, :1]
            best = np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)
        out = self.labels[best]
        return out[0] if single else out


def nearest_label(query, reference_points, reference_labels):
    return LabelIndex(reference_points, reference_labels).query(query)
