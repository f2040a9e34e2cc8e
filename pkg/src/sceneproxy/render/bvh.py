"""Median-split AABB tree over triangles, with a watertight ray test."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from ..errors import EmptyScene

LEAF_SIZE = 4
STACK_SIZE = 128


@dataclass(frozen=True)
class Bvh:
    lo: np.ndarray      # (N, 3) node box minimum
    hi: np.ndarray      # (N, 3) node box maximum
    left: np.ndarray    # (N,) child index, -1 for leaves
    right: np.ndarray   # (N,)
    start: np.ndarray   # (N,) first triangle of a leaf (into `tris`)
    count: np.ndarray   # (N,) triangle count of a leaf, 0 for inner nodes
    tris: np.ndarray    # (T, 3, 3) triangles in leaf order
    order: np.ndarray   # (T,) original index of each triangle in `tris`

    @property
    def arrays(self):
        return self.lo, self.hi, self.left, self.right, self.start, self.count, self.tris


class Hit(NamedTuple):
    t: float
    triangle: int
    barycentrics: tuple  # weights of v0, v1, v2


def build_bvh(triangles, leaf_size=LEAF_SIZE):
    tris = np.ascontiguousarray(np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3))
    n = len(tris)
    if n == 0:
        raise EmptyScene("cannot build a BVH over zero triangles")
    cent = tris.mean(axis=1)
    order = np.arange(n)
    nodes = []

    def build(a, b):
        idx = len(nodes)
        nodes.append(None)
        sub = order[a:b]
        pts = tris[sub].reshape(-1, 3)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if b - a <= leaf_size:
            nodes[idx] = (lo, hi, -1, -1, a, b - a)
            return idx
        c = cent[sub]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        order[a:b] = sub[np.argsort(c[:, axis], kind="stable")]
        mid = (a + b) // 2
        left = build(a, mid)
        right = build(mid, b)
        nodes[idx] = (lo, hi, left, right, a, 0)
        return idx

    build(0, n)
    lo = np.array([nd[0] for nd in nodes])
    hi = np.array([nd[1] for nd in nodes])
    ints = np.array([nd[2:] for nd in nodes], dtype=np.int64)
    return Bvh(lo, hi, ints[:, 0].copy(), ints[:, 1].copy(), ints[:, 2].copy(),
               ints[:, 3].copy(), np.ascontiguousarray(tris[order]), order.copy())


@njit(cache=True, error_model="numpy")
def _slab(lo, hi, o0, o1, o2, i0, i1, i2, tmax):
    """Entry distance of the ray into the box, or inf on a miss."""
    tn, tf = 0.0, tmax
    o = (o0, o1, o2)
    inv = (i0, i1, i2)
    for a in range(3):
        if np.isinf(inv[a]):
            if o[a] < lo[a] or o[a] > hi[a]:
                return np.inf
            continue
        t1 = (lo[a] - o[a]) * inv[a]
        t2 = (hi[a] - o[a]) * inv[a]
        if t1 > t2:
            t1, t2 = t2, t1
        tn = max(tn, t1)
        tf = min(tf, t2)
        if tn > tf:
            return np.inf
    return tn


@njit(cache=True, error_model="numpy")
def ray_triangle(tri, o0, o1, o2, d0, d1, d2, tmin, tmax):
    """Watertight ray/triangle test. Returns (t, b0, b1, b2) with t = inf on
    a miss; b are the weights of the three vertices."""
    d = (d0, d1, d2)
    ad = (abs(d0), abs(d1), abs(d2))
    kz = 0
    if ad[1] > ad[kz]:
        kz = 1
    if ad[2] > ad[kz]:
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0:
        kx, ky = ky, kx
    sx = d[kx] / d[kz]
    sy = d[ky] / d[kz]
    sz = 1.0 / d[kz]
    o = (o0, o1, o2)
    ax = tri[0, kx] - o[kx]
    ay = tri[0, ky] - o[ky]
    az = tri[0, kz] - o[kz]
    bx = tri[1, kx] - o[kx]
    by = tri[1, ky] - o[ky]
    bz = tri[1, kz] - o[kz]
    cx = tri[2, kx] - o[kx]
    cy = tri[2, ky] - o[ky]
    cz = tri[2, kz] - o[kz]
    ax -= sx * az
    ay -= sy * az
    bx -= sx * bz
    by -= sy * bz
    cx -= sx * cz
    cy -= sy * cz
    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0 or v < 0 or w < 0) and (u > 0 or v > 0 or w > 0):
        return np.inf, 0.0, 0.0, 0.0
    det = u + v + w
    if det == 0.0:
        return np.inf, 0.0, 0.0, 0.0
    t = (u * az + v * bz + w * cz) * sz / det
    if not (t > tmin and t < tmax):
        return np.inf, 0.0, 0.0, 0.0
    return t, u / det, v / det, w / det


@njit(cache=True, error_model="numpy")
def nearest_hit(lo, hi, left, right, start, count, tris, o0, o1, o2, d0, d1, d2, tmin, tmax):
    """Closest hit along the ray: (t, triangle, b0, b1, b2); t = inf on a miss."""
    i0, i1, i2 = 1.0 / d0, 1.0 / d1, 1.0 / d2
    stack = np.empty(STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    best_t, best_k, bb0, bb1, bb2 = tmax, -1, 0.0, 0.0, 0.0
    while sp > 0:
        sp -= 1
        nd = stack[sp]
        if _slab(lo[nd], hi[nd], o0, o1, o2, i0, i1, i2, best_t) == np.inf:
            continue
        if left[nd] < 0:
            for k in range(start[nd], start[nd] + count[nd]):
                t, b0, b1, b2 = ray_triangle(tris[k], o0, o1, o2, d0, d1, d2, tmin, best_t)
                if t < best_t:
                    best_t, best_k, bb0, bb1, bb2 = t, k, b0, b1, b2
        else:
            stack[sp] = left[nd]
            stack[sp + 1] = right[nd]
            sp += 2
    if best_k < 0:
        return np.inf, -1, 0.0, 0.0, 0.0
    return best_t, best_k, bb0, bb1, bb2


@njit(cache=True, error_model="numpy")
def occluded(lo, hi, left, right, start, count, tris, o0, o1, o2, d0, d1, d2, tmin, tmax):
    i0, i1, i2 = 1.0 / d0, 1.0 / d1, 1.0 / d2
    stack = np.empty(STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        nd = stack[sp]
        if _slab(lo[nd], hi[nd], o0, o1, o2, i0, i1, i2, tmax) == np.inf:
            continue
        if left[nd] < 0:
            for k in range(start[nd], start[nd] + count[nd]):
                t, _, _, _ = ray_triangle(tris[k], o0, o1, o2, d0, d1, d2, tmin, tmax)
                if t < tmax:
                    return True
        else:
            stack[sp] = left[nd]
            stack[sp + 1] = right[nd]
            sp += 2
    return False


def intersect(bvh, origin, direction, tmin=0.0, tmax=np.inf):
    """Nearest hit of the ray with the tree, or None. The reported triangle
    index refers to the original (pre-build) triangle order."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    t, k, b0, b1, b2 = nearest_hit(*bvh.arrays, o[0], o[1], o[2], d[0], d[1], d[2],
                                   float(tmin), float(tmax))
    if k < 0:
        return None
    return Hit(t, int(bvh.order[k]), (b0, b1, b2))
