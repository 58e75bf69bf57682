"""Axis-aligned bounding volume hierarchy over triangles.

Median split on the longest centroid axis, at most ``leaf_size`` triangles
per leaf. Queries are traversed breadth-first for a whole batch of points or
rays at once, so the per-level work is a handful of numpy calls.
"""
from __future__ import annotations

import numpy as np

from .geometry import box_distance_sq, point_triangle_distance_sq, ray_box_interval, ray_triangle_t

LEAF_SIZE = 8


class BVH:
    def __init__(self, triangles, leaf_size=LEAF_SIZE):
        tri = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
        if len(tri) == 0:
            raise ValueError("BVH needs at least one triangle")
        self.a = np.ascontiguousarray(tri[:, 0])
        self.b = np.ascontiguousarray(tri[:, 1])
        self.c = np.ascontiguousarray(tri[:, 2])
        self.leaf_size = leaf_size
        self._build(tri)

    def _build(self, tri):
        tlo = tri.min(axis=1)
        thi = tri.max(axis=1)
        cen = tri.mean(axis=1)
        order = np.arange(len(tri))
        lo, hi, left, right, start, count = [], [], [], [], [], []

        def new_node(s, e):
            idx = order[s:e]
            lo.append(tlo[idx].min(axis=0))
            hi.append(thi[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(s)
            count.append(e - s)
            return len(lo) - 1

        stack = [(new_node(0, len(tri)), 0, len(tri))]
        while stack:
            node, s, e = stack.pop()
            n = e - s
            if n <= self.leaf_size:
                continue
            idx = order[s:e]
            c = cen[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            mid = n // 2
            # stable tie order keeps the build deterministic
            part = np.argsort(c[:, axis], kind="stable")
            order[s:e] = idx[part]
            m = s + mid
            l_id = new_node(s, m)
            r_id = new_node(m, e)
            left[node] = l_id
            right[node] = r_id
            count[node] = 0
            stack.append((r_id, m, e))
            stack.append((l_id, s, m))

        self.order = order
        self.lo = np.array(lo)
        self.hi = np.array(hi)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.start = np.array(start, dtype=np.int64)
        self.count = np.array(count, dtype=np.int64)

    @property
    def node_count(self):
        return len(self.lo)

    def _expand_leaves(self, q, nodes):
        counts = self.count[nodes]
        total = int(counts.sum())
        reps = np.repeat(np.arange(len(nodes)), counts)
        offsets = np.cumsum(counts) - counts
        local = np.arange(total) - offsets[reps]
        tri = self.order[self.start[nodes][reps] + local]
        return q[reps], tri

    def closest(self, points, chunk=4096):
        """Nearest surface point for each query.

        Returns (squared distance, triangle index, closest point). Among
        equidistant triangles the lowest index wins.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        n = len(points)
        d2 = np.empty(n)
        tri = np.empty(n, dtype=np.int64)
        cp = np.empty((n, 3))
        for s in range(0, n, chunk):
            e = min(n, s + chunk)
            d2[s:e], tri[s:e], cp[s:e] = self._closest_chunk(points[s:e])
        return d2, tri, cp

    def _eval_pairs(self, points, q, t, best_d2, best_tri, best_cp):
        d2, cp = point_triangle_distance_sq(points[q], self.a[t], self.b[t], self.c[t])
        o = np.lexsort((t, d2, q))
        q, t, d2, cp = q[o], t[o], d2[o], cp[o]
        first = np.ones(len(q), dtype=bool)
        first[1:] = q[1:] != q[:-1]
        q, t, d2, cp = q[first], t[first], d2[first], cp[first]
        better = (d2 < best_d2[q]) | ((d2 == best_d2[q]) & (t < best_tri[q]))
        q, t, d2, cp = q[better], t[better], d2[better], cp[better]
        best_d2[q] = d2
        best_tri[q] = t
        best_cp[q] = cp

    def _closest_chunk(self, points):
        m = len(points)
        best_d2 = np.full(m, np.inf)
        best_tri = np.full(m, np.iinfo(np.int64).max)
        best_cp = np.zeros((m, 3))
        q_all = np.arange(m)

        # greedy descent gives a tight initial bound for pruning
        node = np.zeros(m, dtype=np.int64)
        inner = self.left[node] >= 0
        while inner.any():
            qi = q_all[inner]
            nl = self.left[node[qi]]
            nr = self.right[node[qi]]
            dl = box_distance_sq(points[qi], self.lo[nl], self.hi[nl])
            dr = box_distance_sq(points[qi], self.lo[nr], self.hi[nr])
            node[qi] = np.where(dl <= dr, nl, nr)
            inner = self.left[node] >= 0
        q, t = self._expand_leaves(q_all, node)
        self._eval_pairs(points, q, t, best_d2, best_tri, best_cp)

        q = q_all
        nd = np.zeros(m, dtype=np.int64)
        while len(q):
            lb = box_distance_sq(points[q], self.lo[nd], self.hi[nd])
            keep = lb <= best_d2[q]
            q, nd = q[keep], nd[keep]
            leaf = self.left[nd] < 0
            if leaf.any():
                lq, lt = self._expand_leaves(q[leaf], nd[leaf])
                self._eval_pairs(points, lq, lt, best_d2, best_tri, best_cp)
            iq, inn = q[~leaf], nd[~leaf]
            q = np.concatenate([iq, iq])
            nd = np.concatenate([self.left[inn], self.right[inn]])
        return best_d2, best_tri, best_cp

    def intersect(self, origins, dirs, t_min=0.0, t_max=np.inf, chunk=4096):
        """All ray/triangle hits with t_min < t <= t_max.

        Returns arrays (ray index, triangle index, t) sorted by ray then t.
        """
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (len(origins),))
        out_r, out_t, out_h = [], [], []
        for s in range(0, len(origins), chunk):
            e = min(len(origins), s + chunk)
            r, t, h = self._intersect_chunk(origins[s:e], dirs[s:e], t_min, t_max[s:e])
            out_r.append(r + s)
            out_t.append(t)
            out_h.append(h)
        r = np.concatenate(out_r)
        t = np.concatenate(out_t)
        h = np.concatenate(out_h)
        o = np.lexsort((t, h, r))
        return r[o], t[o], h[o]

    def _intersect_chunk(self, origins, dirs, t_min, t_max):
        with np.errstate(divide="ignore"):
            inv = 1.0 / dirs
        q = np.arange(len(origins))
        nd = np.zeros(len(origins), dtype=np.int64)
        hits_r, hits_t, hits_h = [], [], []
        while len(q):
            tn, tf = ray_box_interval(origins[q], inv[q], self.lo[nd], self.hi[nd])
            keep = (tn <= tf) & (tf >= t_min) & (tn <= t_max[q])
            q, nd = q[keep], nd[keep]
            leaf = self.left[nd] < 0
            if leaf.any():
                lq, lt = self._expand_leaves(q[leaf], nd[leaf])
                th = ray_triangle_t(origins[lq], dirs[lq], self.a[lt], self.b[lt], self.c[lt])
                ok = ~np.isnan(th)
                ok[ok] = (th[ok] > t_min) & (th[ok] <= t_max[lq[ok]])
                hits_r.append(lq[ok])
                hits_t.append(lt[ok])
                hits_h.append(th[ok])
            iq, inn = q[~leaf], nd[~leaf]
            q = np.concatenate([iq, iq])
            nd = np.concatenate([self.left[inn], self.right[inn]])
        if not hits_r:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
        return np.concatenate(hits_r), np.concatenate(hits_t), np.concatenate(hits_h)
