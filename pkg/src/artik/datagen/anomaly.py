"""Procedural structural defects on posed part meshes.

All six kinds act inside a ball of radius R around the defect center and
scale with the smooth falloff ``w(r) = cos^2(pi r / 2R)``. A spec carries an
orthonormal ``frame`` (columns: surface normal at the center, two tangents)
authored in the part's rest frame. Mapping the spec through the part's rigid
transform makes the defect move with the part, so the same spec yields the
same defect at every articulation value.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import AnomalyRejectedError, InvalidInputError
from ..mesh.bvh import BVH
from ..mesh.sampling import sample_surface
from ..mesh.trimesh import TriangleMesh

KINDS = ("dent", "bulge", "fracture", "bend", "distortion", "missing")

_NOISE_WAVES = 4


@dataclass(frozen=True)
class AnomalySpec:
    kind: str
    center: tuple
    radius: float
    magnitude: float
    target_part: int
    seed: int
    frame: tuple = field(default=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown anomaly kind {self.kind!r}; expected one of {KINDS}")
        if not self.radius > 0:
            raise InvalidInputError("anomaly radius must be positive")
        # magnitude 0 is accepted as the identity deformation
        if not self.magnitude >= 0:
            raise InvalidInputError("anomaly magnitude must be non-negative")
        f = np.asarray(self.frame, dtype=np.float64).reshape(3, 3)
        if not np.allclose(f.T @ f, np.eye(3), atol=1e-9):
            raise InvalidInputError("anomaly frame must be orthonormal")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "frame", tuple(tuple(float(x) for x in row) for row in f))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "magnitude", float(self.magnitude))
        object.__setattr__(self, "target_part", int(self.target_part))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def frame_matrix(self):
        return np.asarray(self.frame)

    @property
    def normal(self):
        return self.frame_matrix[:, 0]

    def transformed(self, transform):
        """The same defect after a rigid motion of its part."""
        return replace(
            self,
            center=tuple(transform.apply(np.asarray(self.center))),
            frame=transform.rotation @ self.frame_matrix,
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "center": list(self.center),
            "radius": self.radius,
            "magnitude": self.magnitude,
            "target_part": self.target_part,
            "seed": self.seed,
            "frame": [list(r) for r in self.frame],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            center=tuple(d["center"]),
            radius=d["radius"],
            magnitude=d["magnitude"],
            target_part=d["target_part"],
            seed=d["seed"],
            frame=tuple(tuple(r) for r in d["frame"]),
        )


def falloff(r, radius):
    w = np.cos(np.pi * np.asarray(r) / (2.0 * radius)) ** 2
    return np.where(np.asarray(r) < radius, w, 0.0)


def sample_anomaly_spec(part_meshes, kind, rng, radius_range, magnitude_range):
    """Draw a defect on a random part, in rest coordinates."""
    target = int(rng.integers(len(part_meshes)))
    mesh = part_meshes[target]
    point, face, _ = sample_surface(mesh, 1, rng)
    n = mesh.face_normals[face[0]]
    helper = np.eye(3)[np.argmin(np.abs(n))]
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    spin = rng.uniform(0.0, 2.0 * np.pi)
    t1, t2 = np.cos(spin) * t1 + np.sin(spin) * t2, -np.sin(spin) * t1 + np.cos(spin) * t2
    if rng.random() < 0.5:  # mirror the step / bend direction, keep the frame proper
        n_col, t2 = -n, -t2
    else:
        n_col = n
    frame = np.stack([n_col, t1, t2], axis=1)
    return AnomalySpec(
        kind=kind,
        center=tuple(point[0]),
        radius=float(rng.uniform(*radius_range)),
        magnitude=float(rng.uniform(*magnitude_range)),
        target_part=target,
        seed=int(rng.integers(2**31)),
        frame=frame,
    )


def _noise(u, radius, seed):
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(_NOISE_WAVES, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    freq = rng.uniform(1.0, 2.0, size=_NOISE_WAVES) * np.pi / radius
    phase = rng.uniform(0.0, 2.0 * np.pi, size=_NOISE_WAVES)
    return np.sin(u @ (dirs * freq[:, None]).T + phase).sum(axis=1) / np.sqrt(_NOISE_WAVES / 2.0)


def displacement(mesh, spec):
    """Per-vertex displacement for the smooth kinds (everything but missing)."""
    v = mesh.vertices
    c = np.asarray(spec.center)
    rel = v - c
    r = np.linalg.norm(rel, axis=1)
    w = falloff(r, spec.radius)
    inside = w > 0
    disp = np.zeros_like(v)
    m = spec.magnitude
    frame = spec.frame_matrix
    if spec.kind in ("dent", "bulge"):
        sgn = -1.0 if spec.kind == "dent" else 1.0
        disp[inside] = sgn * m * w[inside, None] * mesh.vertex_normals[inside]
    elif spec.kind == "fracture":
        direction = frame[:, 0] + 0.5 * frame[:, 1]
        direction /= np.linalg.norm(direction)
        side = inside & (rel @ frame[:, 2] > 0)
        disp[side] = m * w[side, None] * direction
    elif spec.kind == "bend":
        k = frame[:, 1]
        angle = 2.0 * m / spec.radius * w[inside]
        p = rel[inside]
        cos, sin = np.cos(angle)[:, None], np.sin(angle)[:, None]
        rotated = p * cos + np.cross(k, p) * sin + np.outer(p @ k, k) * (1.0 - cos)
        disp[inside] = rotated - p
    elif spec.kind == "distortion":
        local = rel[inside] @ frame
        eta = _noise(local, spec.radius, spec.seed)
        disp[inside] = m * (w[inside] * eta)[:, None] * mesh.vertex_normals[inside]
    return disp


def _boundary_loops(faces):
    """Directed boundary edges (u -> v) chained into closed loops."""
    directed = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    keys = {(int(a), int(b)) for a, b in directed}
    nxt = {}
    for a, b in directed:
        a, b = int(a), int(b)
        if (b, a) not in keys:
            if a in nxt:
                raise AnomalyRejectedError("hole boundary is not a simple loop")
            nxt[a] = b
    loops = []
    while nxt:
        start = min(nxt)
        loop = [start]
        cur = nxt.pop(start)
        while cur != start:
            if cur not in nxt:
                raise AnomalyRejectedError("open hole boundary")
            loop.append(cur)
            cur = nxt.pop(cur)
        loops.append(loop)
    return loops


def _cut_hole(mesh, spec):
    v = mesh.vertices
    r = np.linalg.norm(v - np.asarray(spec.center), axis=1)
    inside_v = r < spec.radius
    doomed = inside_v[mesh.faces].all(axis=1)
    if not doomed.any():
        raise AnomalyRejectedError("no face lies fully inside the defect ball")
    removed_n = (mesh.face_normals[doomed] * mesh.face_areas[doomed, None]).sum(axis=0)
    removed_n /= np.linalg.norm(removed_n)
    kept = mesh.faces[~doomed]
    loops = _boundary_loops(kept)
    verts = [v]
    new_faces = [kept]
    nv = len(v)
    for loop in loops:
        ring = v[loop]
        apex = ring.mean(axis=0) - spec.magnitude * removed_n
        verts.append(apex[None])
        nxt = np.roll(loop, -1)
        new_faces.append(np.stack([nxt, loop, np.full(len(loop), nv)], axis=1))
        nv += 1
    faces = np.concatenate(new_faces)
    modified = np.zeros(len(faces), dtype=bool)
    modified[len(kept):] = True
    vertices = np.concatenate(verts)
    used = np.unique(faces)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[faces], modified


def inject_anomaly(posed_parts, spec, validate=True):
    """Deform ``posed_parts[spec.target_part]`` according to ``spec``.

    ``spec`` must already be expressed in posed coordinates. Returns the new
    part list and a boolean mask of modified faces on the target part. Raises
    :class:`AnomalyRejectedError` when the result would self-intersect.
    """
    parts = list(posed_parts)
    target = parts[spec.target_part]
    if spec.magnitude == 0:
        return [p.copy() for p in parts], np.zeros(len(target.faces), dtype=bool)
    gap = np.min(np.linalg.norm(target.vertices - np.asarray(spec.center), axis=1))
    if gap > 2 * spec.radius:
        raise InvalidInputError("defect center is farther than 2R from the target part")
    if spec.kind == "missing":
        verts, faces, modified = _cut_hole(target, spec)
    else:
        disp = displacement(target, spec)
        moved = np.any(disp != 0, axis=1)
        verts = target.vertices + disp
        faces = target.faces
        modified = moved[faces].any(axis=1)
    try:
        deformed = TriangleMesh(verts, faces)
    except ValueError as exc:
        raise AnomalyRejectedError(f"deformation produced invalid faces: {exc}") from exc
    if validate:
        _validate(target, deformed, modified, [p for i, p in enumerate(parts) if i != spec.target_part], spec)
    parts[spec.target_part] = deformed
    return parts, modified


def _edges(faces):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _segment_hits(bvh, p0, p1, eps=1e-9):
    seg, tri, _ = bvh.intersect(p0, p1 - p0, t_min=eps, t_max=1.0 - eps)
    return seg, tri


def _validate(original, deformed, modified, others, spec):
    if not deformed.is_watertight:
        raise AnomalyRejectedError("deformed part is not watertight")
    if spec.kind != "missing":
        flipped = np.einsum("ij,ij->i", deformed.face_normals[modified], original.face_normals[modified]) <= 0
        if flipped.any():
            raise AnomalyRejectedError("deformation folds faces over")
    if not modified.any():
        return
    v = deformed.vertices
    f = deformed.faces
    mod_faces = np.flatnonzero(modified)
    mod_bvh = BVH(v[f[mod_faces]])

    # every edge of the part against the modified faces
    edges = _edges(f)
    seg, tri = _segment_hits(mod_bvh, v[edges[:, 0]], v[edges[:, 1]])
    if len(seg):
        fv = f[mod_faces[tri]]
        shares = (fv == edges[seg, 0:1]).any(axis=1) | (fv == edges[seg, 1:2]).any(axis=1)
        if (~shares).any():
            raise AnomalyRejectedError("deformation self-intersects")

    mod_edges = _edges(f[mod_faces])
    for other in others:
        seg, _ = _segment_hits(other.bvh, v[mod_edges[:, 0]], v[mod_edges[:, 1]])
        if len(seg):
            raise AnomalyRejectedError("deformation penetrates another part")
        oe = _edges(other.faces)
        seg, _ = _segment_hits(mod_bvh, other.vertices[oe[:, 0]], other.vertices[oe[:, 1]])
        if len(seg):
            raise AnomalyRejectedError("another part penetrates the deformed region")
