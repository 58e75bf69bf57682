"""Procedural watertight meshes: voxel solids, boxes, icospheres."""
from __future__ import annotations

import numpy as np

from .trimesh import TriangleMesh

_CYCLIC = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


def voxel_solid(occupancy, origin=(0.0, 0.0, 0.0), spacing=1.0):
    """Boundary surface of a union of grid cells, outward-oriented.

    Every exposed cell face becomes two triangles, and lattice corners are shared,
    so the result is watertight as long as no two filled cells touch only
    along an edge or at a corner.
    """
    occ = np.asarray(occupancy, dtype=bool)
    spacing = np.broadcast_to(np.asarray(spacing, dtype=np.float64), (3,))
    origin = np.asarray(origin, dtype=np.float64)
    padded = np.pad(occ, 1)
    dims = np.array(occ.shape) + 1
    quads = []
    for axis in range(3):
        b, c = _CYCLIC[axis]
        for side in (1, -1):
            shifted = np.roll(padded, -side, axis=axis)
            exposed = padded & ~shifted
            cells = np.argwhere(exposed[1:-1, 1:-1, 1:-1])
            if len(cells) == 0:
                continue
            base = cells.copy()
            if side == 1:
                base[:, axis] += 1
            corners = []
            for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                p = base.copy()
                p[:, b] += du
                p[:, c] += dv
                corners.append(p)
            corners = np.stack(corners, axis=1)
            if side == -1:
                corners = corners[:, ::-1]
            quads.append(corners)
    quads = np.concatenate(quads)
    lin = (quads[..., 0] * dims[1] + quads[..., 1]) * dims[2] + quads[..., 2]
    used, inverse = np.unique(lin.ravel(), return_inverse=True)
    inverse = inverse.reshape(lin.shape)
    ijk = np.stack(np.unravel_index(used, tuple(dims)), axis=1)
    vertices = origin + ijk * spacing
    faces = np.concatenate([inverse[:, [0, 1, 2]], inverse[:, [0, 2, 3]]])
    return TriangleMesh(vertices, faces)


def box(lo, hi, cell=None, divisions=None):
    """Axis-aligned box from ``lo`` to ``hi`` with a regular surface grid."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    size = hi - lo
    if divisions is None:
        if cell is None:
            divisions = (1, 1, 1)
        else:
            divisions = tuple(int(max(1, round(s / cell))) for s in size)
    divisions = np.asarray(divisions)
    return voxel_solid(np.ones(tuple(divisions), dtype=bool), lo, size / divisions)


def icosphere(subdivisions=4, radius=1.0, center=(0.0, 0.0, 0.0)):
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdivisions):
        edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = inv.reshape(3, -1).T + len(v)
        v = np.concatenate([v, mid])
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
        f = np.concatenate(
            [
                np.stack([a, ab, ca], axis=1),
                np.stack([b, bc, ab], axis=1),
                np.stack([c, ca, bc], axis=1),
                np.stack([ab, bc, ca], axis=1),
            ]
        )
    return TriangleMesh(v * radius + np.asarray(center, dtype=np.float64), f)
