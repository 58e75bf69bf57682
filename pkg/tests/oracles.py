"""Slow reference implementations the library is checked against.

These deliberately share no code with the package: distances come from an
exhaustive scan with a projection-based closest point, signs from the
solid-angle winding number, AUROC from counting every pair.
"""
import numpy as np


def _seg_closest(p, a, b):
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return a + t * ab


def point_triangle_distance(p, a, b, c):
    """Distance via plane projection; falls back to the three edges."""
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    q = p - ((p - a) @ n) * n
    # inside test with same-side signs of the sub-triangle normals
    s1 = np.cross(b - a, q - a) @ n
    s2 = np.cross(c - b, q - b) @ n
    s3 = np.cross(a - c, q - c) @ n
    if s1 >= 0 and s2 >= 0 and s3 >= 0:
        return float(np.linalg.norm(p - q))
    best = min(np.linalg.norm(p - _seg_closest(p, u, v)) for u, v in ((a, b), (b, c), (c, a)))
    return float(best)


def _seg_dist_many(p, a, b):
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def distances_to_all(p, tri):
    """Same construction as point_triangle_distance, vectorized over triangles."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    h = np.einsum("ij,ij->i", p - a, n)
    q = p - h[:, None] * n
    s1 = np.einsum("ij,ij->i", np.cross(b - a, q - a), n)
    s2 = np.einsum("ij,ij->i", np.cross(c - b, q - b), n)
    s3 = np.einsum("ij,ij->i", np.cross(a - c, q - c), n)
    inside = (s1 >= 0) & (s2 >= 0) & (s3 >= 0)
    pp = np.broadcast_to(p, a.shape)
    edge = np.minimum(np.minimum(_seg_dist_many(pp, a, b), _seg_dist_many(pp, b, c)), _seg_dist_many(pp, c, a))
    return np.where(inside, np.abs(h), edge)


def brute_unsigned(vertices, faces, points):
    tri = np.asarray(vertices, dtype=np.float64)[faces]
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return np.array([distances_to_all(p, tri).min() for p in pts])


def winding_number(vertices, faces, points):
    """Generalized winding number (Van Oosterom-Strackee solid angles)."""
    tri = vertices[faces]
    w = np.empty(len(points))
    for i, p in enumerate(points):
        a, b, c = tri[:, 0] - p, tri[:, 1] - p, tri[:, 2] - p
        la, lb, lc = (np.linalg.norm(v, axis=1) for v in (a, b, c))
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = la * lb * lc + np.einsum("ij,ij->i", a, b) * lc + np.einsum("ij,ij->i", b, c) * la + \
            np.einsum("ij,ij->i", c, a) * lb
        w[i] = np.sum(2.0 * np.arctan2(num, den)) / (4.0 * np.pi)
    return w


def brute_signed(vertices, faces, points):
    d = brute_unsigned(vertices, faces, points)
    inside = winding_number(vertices, faces, points) > 0.5
    return np.where(inside, -d, d)


def pairwise_auroc(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    pos, neg = scores[labels], scores[~labels]
    total = 0.0
    for s in pos:
        total += np.sum(s > neg) + 0.5 * np.sum(s == neg)
    return total / (len(pos) * len(neg))


def central_difference(f, x, h=1e-4, only=None):
    """Numerical gradient of scalar ``f`` with respect to array ``x`` (modified in place, restored).

    ``only`` is an optional boolean mask of the entries to differentiate;
    the others come back as nan.
    """
    g = np.zeros_like(x) if only is None else np.full(x.shape, np.nan)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    idx = range(flat.size) if only is None else np.flatnonzero(only)
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def refined_difference(f, x, steps=(1e-5, 1e-6, 1e-7), agree=1e-5, noise=1e-10):
    """Central differences at shrinking ``h``, trusting the smallest step that is stable.

    Piecewise-linear pieces (ReLU, |.|, clamps) bias any step that straddles
    a kink, and two straddling steps can still agree with each other. So the
    pairs are scanned from the small end: the first consecutive pair that
    agrees (relative ``agree`` plus an absolute roundoff allowance) supplies
    its smaller-step estimate. With no agreeing pair the smallest step wins.
    Larger steps are only evaluated where the smaller pairs disagreed.
    """
    b = central_difference(f, x, steps[-1])
    out = b.copy()
    settled = np.zeros(x.shape, dtype=bool)
    for h in reversed(steps[:-1]):
        todo = ~settled
        if not todo.any():
            break
        a = central_difference(f, x, h, only=todo)
        scale = np.maximum(np.abs(a), np.abs(b))
        ok = todo & (np.abs(a - b) <= agree * scale + noise)
        out[ok] = b[ok]
        settled |= ok
        b = a
    return out


def grad_mismatch(analytic, numeric, rel=1e-4, floor=1e-9):
    """Indices where |a - n| exceeds both rel * max(|a|, |n|) and the FD noise floor."""
    diff = np.abs(analytic - numeric)
    bad = (diff > rel * np.maximum(np.abs(analytic), np.abs(numeric))) & (diff > floor)
    return np.argwhere(bad)
