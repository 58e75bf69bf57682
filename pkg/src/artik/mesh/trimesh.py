from __future__ import annotations

from functools import cached_property

import numpy as np

from ..errors import InvalidInputError, DegenerateGeometryError

MIN_FACE_AREA = 1e-12


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class TriangleMesh:
    """Immutable indexed triangle mesh.

    Construction validates indices, rejects faces that repeat a vertex and
    faces with area <= 1e-12. Use :meth:`cleaned` to build a mesh from raw,
    possibly dirty input instead.
    """

    def __init__(self, vertices, faces, validate=True):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        self.vertices = _frozen(vertices, np.float64)
        self.faces = _frozen(faces, np.int64)
        if validate:
            self._validate()

    def _validate(self):
        f = self.faces
        if len(f) and (f.min() < 0 or f.max() >= len(self.vertices)):
            raise InvalidInputError("face index out of range")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise InvalidInputError("face with repeated vertex")
        if len(f) and self.face_areas.min() <= MIN_FACE_AREA:
            raise DegenerateGeometryError("zero-area face")

    @classmethod
    def cleaned(cls, vertices, faces):
        """Drop degenerate and duplicate faces, then unreferenced vertices."""
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
        faces = faces[ok]
        tri = vertices[faces]
        area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        faces = faces[area > MIN_FACE_AREA]
        # duplicates regardless of winding; keep first occurrence
        _, first = np.unique(np.sort(faces, axis=1), axis=0, return_index=True)
        faces = faces[np.sort(first)]
        used = np.unique(faces)
        remap = np.full(len(vertices), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return cls(vertices[used], remap[faces])

    def __len__(self):
        return len(self.faces)

    def __repr__(self):
        return f"TriangleMesh(vertices={len(self.vertices)}, faces={len(self.faces)})"

    @property
    def triangles(self):
        return self.vertices[self.faces]

    @cached_property
    def face_areas(self):
        t = self.triangles
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    @cached_property
    def face_normals(self):
        t = self.triangles
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def vertex_normals(self):
        """Area-weighted average of incident face normals."""
        t = self.triangles
        weighted = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.faces[:, k], weighted)
        norm = np.linalg.norm(acc, axis=1, keepdims=True)
        norm[norm == 0] = 1.0
        return acc / norm

    @property
    def area(self):
        return float(self.face_areas.sum())

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def is_watertight(self):
        """Every directed edge appears once and its reverse appears once."""
        if len(self.faces) == 0:
            return False
        f = self.faces
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        n = len(self.vertices)
        key = directed[:, 0] * n + directed[:, 1]
        rev = directed[:, 1] * n + directed[:, 0]
        if len(np.unique(key)) != len(key):
            return False
        return bool(np.all(np.isin(rev, key)))

    @cached_property
    def bvh(self):
        from .bvh import BVH

        return BVH(self.triangles)

    def transformed(self, rotation, translation):
        v = self.vertices @ np.asarray(rotation, dtype=np.float64).T + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(v, self.faces, validate=False)

    def with_vertices(self, vertices, validate=True):
        return TriangleMesh(vertices, self.faces, validate=validate)

    def copy(self):
        return TriangleMesh(self.vertices, self.faces, validate=False)

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices) and np.array_equal(self.faces, other.faces)

    __hash__ = None


def merge_meshes(meshes):
    """Concatenate meshes; returns the merged mesh and a per-face source index."""
    if not meshes:
        raise InvalidInputError("no meshes to merge")
    verts, faces, owner = [], [], []
    offset = 0
    for i, m in enumerate(meshes):
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        owner.append(np.full(len(m.faces), i, dtype=np.int64))
        offset += len(m.vertices)
    merged = TriangleMesh(np.concatenate(verts), np.concatenate(faces), validate=False)
    return merged, np.concatenate(owner)
