"""Vectorized point/triangle and ray/triangle primitives."""
from __future__ import annotations

import numpy as np


def _dot(u, v):
    return np.einsum("ij,ij->i", u, v)


def closest_point_on_triangle(p, a, b, c):
    """Closest point on triangles (a, b, c) to points p, all shaped (M, 3).

    Voronoi-region decomposition (Ericson, Real-Time Collision Detection 5.1.5):
    vertex regions, then edge regions, then the face interior.
    """
    p, a, b, c = (np.asarray(x, dtype=np.float64) for x in (p, a, b, c))
    out = np.empty_like(p)
    todo = np.ones(len(p), dtype=bool)

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    m = (d1 <= 0) & (d2 <= 0)
    out[m] = a[m]
    todo &= ~m

    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    m = todo & (d3 >= 0) & (d4 <= d3)
    out[m] = b[m]
    todo &= ~m

    vc = d1 * d4 - d3 * d2
    m = todo & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    if m.any():
        v = d1[m] / (d1[m] - d3[m])
        out[m] = a[m] + v[:, None] * ab[m]
    todo &= ~m

    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    m = todo & (d6 >= 0) & (d5 <= d6)
    out[m] = c[m]
    todo &= ~m

    vb = d5 * d2 - d1 * d6
    m = todo & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    if m.any():
        w = d2[m] / (d2[m] - d6[m])
        out[m] = a[m] + w[:, None] * ac[m]
    todo &= ~m

    va = d3 * d6 - d5 * d4
    m = todo & (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    if m.any():
        w = (d4[m] - d3[m]) / ((d4[m] - d3[m]) + (d5[m] - d6[m]))
        out[m] = b[m] + w[:, None] * (c[m] - b[m])
    todo &= ~m

    if todo.any():
        denom = 1.0 / (va[todo] + vb[todo] + vc[todo])
        v = vb[todo] * denom
        w = vc[todo] * denom
        out[todo] = a[todo] + ab[todo] * v[:, None] + ac[todo] * w[:, None]
    return out


def point_triangle_distance_sq(p, a, b, c):
    q = closest_point_on_triangle(p, a, b, c)
    d = p - q
    return _dot(d, d), q


def ray_triangle_t(origins, dirs, a, b, c, eps=1e-12):
    """Moller-Trumbore; returns hit distance t per pair, NaN on miss.

    Hits exactly on an edge or vertex are reported (inclusive barycentric
    test), so a ray through a shared edge is counted once per incident face.
    """
    e1 = b - a
    e2 = c - a
    pvec = np.cross(dirs, e2)
    det = _dot(e1, pvec)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origins - a
    u = _dot(tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = _dot(dirs, qvec) * inv
    t = _dot(e2, qvec) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1)
    return np.where(hit, t, np.nan)


def box_distance_sq(p, lo, hi):
    d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
    return _dot(d, d)


def ray_box_interval(origins, inv_dirs, lo, hi):
    """Slab test; returns (t_near, t_far). Empty when t_near > t_far."""
    with np.errstate(invalid="ignore"):
        t1 = (lo - origins) * inv_dirs
        t2 = (hi - origins) * inv_dirs
    # 0 * inf from axis-parallel rays starting on a slab plane -> treat as inside
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    tmin = np.minimum(t1, t2).max(axis=1)
    tmax = np.maximum(t1, t2).min(axis=1)
    return tmin, tmax
