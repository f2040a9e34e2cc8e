"""Per-pixel direct-lighting kernels.

Every pixel is shaded independently from a counter-based hash of
(seed, frame, x, y, pass, dimension), so the output does not depend on how
rows are distributed over threads.
"""

import math

import numpy as np
from numba import njit, prange

from .brdf import INV_PI, cosine_sample, ggx_eval, ggx_pdf, ggx_sample
from .bvh import nearest_hit, occluded

PASS_DIFF, PASS_GGX1, PASS_GGX2 = 0, 1, 2

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def hash_key(seed, frame, x, y, pas, dim):
    h = mix64(np.uint64(seed) + _GAMMA)
    h = mix64(h ^ np.uint64(frame))
    h = mix64(h ^ np.uint64(x))
    h = mix64(h ^ np.uint64(y))
    h = mix64(h ^ np.uint64(pas))
    h = mix64(h ^ np.uint64(dim))
    return h


@njit(cache=True)
def to_unit(h):
    return float(h >> _S11) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def radical_inverse2(i):
    b = np.uint32(i)
    b = ((b << np.uint32(16)) | (b >> np.uint32(16))) & np.uint32(0xFFFFFFFF)
    b = ((b & np.uint32(0x55555555)) << np.uint32(1)) | ((b & np.uint32(0xAAAAAAAA)) >> np.uint32(1))
    b = ((b & np.uint32(0x33333333)) << np.uint32(2)) | ((b & np.uint32(0xCCCCCCCC)) >> np.uint32(2))
    b = ((b & np.uint32(0x0F0F0F0F)) << np.uint32(4)) | ((b & np.uint32(0xF0F0F0F0)) >> np.uint32(4))
    b = ((b & np.uint32(0x00FF00FF)) << np.uint32(8)) | ((b & np.uint32(0xFF00FF00)) >> np.uint32(8))
    return float(b & np.uint32(0xFFFFFFFF)) * (1.0 / 4294967296.0)


@njit(cache=True)
def _wrap(x):
    return x - math.floor(x)


@njit(cache=True, error_model="numpy")
def env_lookup(env, d0, d1, d2):
    h, w = env.shape[0], env.shape[1]
    phi = math.atan2(d0, -d2)
    theta = math.acos(min(1.0, max(-1.0, d1)))
    u = int(math.floor((phi + math.pi) / (2.0 * math.pi) * w)) % w
    v = min(max(int(math.floor(theta / math.pi * h)), 0), h - 1)
    return u, v


def env_distribution(env_px):
    """Piecewise-constant sampling tables over texels, weighted by luminance
    times sin(theta): (texel weights, row cdf, per-row cdfs, total)."""
    h, w = env_px.shape[:2]
    lum = env_px @ np.array([0.2126, 0.7152, 0.0722])
    lum = lum * np.sin(np.pi * (np.arange(h) + 0.5) / h)[:, None]
    col_cdf = np.zeros((h, w + 1))
    col_cdf[:, 1:] = np.cumsum(lum, axis=1)
    row = col_cdf[:, -1]
    row_cdf = np.zeros(h + 1)
    row_cdf[1:] = np.cumsum(row)
    return lum, row_cdf, col_cdf, float(row_cdf[-1])


@njit(cache=True, error_model="numpy")
def _search(cdf, n, x):
    """Largest i < n with cdf[i] <= x."""
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if cdf[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True, error_model="numpy")
def env_sample(lum, row_cdf, col_cdf, total, u1, u2):
    """Direction and solid-angle pdf of an importance-sampled env texel."""
    h, w = lum.shape
    x = u1 * total
    v = _search(row_cdf, h, x)
    while row_cdf[v + 1] - row_cdf[v] <= 0.0 and v > 0:
        v -= 1
    rs = row_cdf[v + 1] - row_cdf[v]
    dv = min(max((x - row_cdf[v]) / rs, 0.0), 1.0 - 1e-12)
    y = u2 * rs
    u = _search(col_cdf[v], w, y)
    while lum[v, u] <= 0.0 and u > 0:
        u -= 1
    du = min(max((y - col_cdf[v, u]) / lum[v, u], 0.0), 1.0 - 1e-12)
    phi = 2.0 * math.pi * (u + du) / w - math.pi
    theta = math.pi * (v + dv) / h
    st = math.sin(theta)
    if st <= 0.0:
        return 0.0, 1.0, 0.0, 0.0
    pdf = lum[v, u] / total * (w * h) / (2.0 * math.pi * math.pi * st)
    return st * math.sin(phi), math.cos(theta), -st * math.cos(phi), pdf


@njit(cache=True, error_model="numpy")
def env_pdf(lum, total, d0, d1, d2):
    if total <= 0.0:
        return 0.0
    h, w = lum.shape
    st = math.sqrt(max(0.0, 1.0 - d1 * d1))
    if st <= 0.0:
        return 0.0
    u, v = env_lookup(lum.reshape(h, w, 1), d0, d1, d2)
    return lum[v, u] / total * (w * h) / (2.0 * math.pi * math.pi * st)


@njit(cache=True, error_model="numpy")
def _brdf(pas, n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha, f0):
    if pas == PASS_DIFF:
        if n0 * l0 + n1 * l1 + n2 * l2 <= 0.0:
            return 0.0
        return INV_PI
    return ggx_eval(n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha, f0)


@njit(cache=True, error_model="numpy")
def _brdf_pdf(pas, n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha):
    if pas == PASS_DIFF:
        c = n0 * l0 + n1 * l1 + n2 * l2
        return c * INV_PI if c > 0.0 else 0.0
    return ggx_pdf(n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha)


@njit(cache=True, error_model="numpy")
def shade(bvh_lo, bvh_hi, bvh_l, bvh_r, bvh_s, bvh_c, tris, env, lum, row_cdf, col_cdf, total,
          p0, p1, p2, n0, n1, n2, v0, v1, v2, pas, spp, alpha, f0, eps, max_dist,
          seed, frame, px, py, out):
    """MIS (balance heuristic) estimate of direct env lighting at a point;
    adds RGB radiance to `out`."""
    o0, o1, o2 = p0 + eps * n0, p1 + eps * n1, p2 + eps * n2
    rl0 = to_unit(hash_key(seed, frame, px, py, pas, 0))
    rl1 = to_unit(hash_key(seed, frame, px, py, pas, 1))
    rb0 = to_unit(hash_key(seed, frame, px, py, pas, 2))
    rb1 = to_unit(hash_key(seed, frame, px, py, pas, 3))
    acc0, acc1, acc2 = 0.0, 0.0, 0.0
    for s in range(spp):
        a = (s + 0.5) / spp
        b = radical_inverse2(s)
        # light sample
        if total > 0.0:
            l0, l1, l2, pl = env_sample(lum, row_cdf, col_cdf, total, _wrap(a + rl0), _wrap(b + rl1))
            if pl > 0.0:
                cos = n0 * l0 + n1 * l1 + n2 * l2
                if cos > 0.0:
                    f = _brdf(pas, n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha, f0)
                    if f > 0.0 and not occluded(bvh_lo, bvh_hi, bvh_l, bvh_r, bvh_s, bvh_c, tris,
                                                o0, o1, o2, l0, l1, l2, 0.0, max_dist):
                        pb = _brdf_pdf(pas, n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha)
                        u, v = env_lookup(env, l0, l1, l2)
                        wgt = f * cos / (pl + pb)
                        acc0 += wgt * env[v, u, 0]
                        acc1 += wgt * env[v, u, 1]
                        acc2 += wgt * env[v, u, 2]
        # brdf sample
        if pas == PASS_DIFF:
            l0, l1, l2 = cosine_sample(n0, n1, n2, _wrap(a + rb0), _wrap(b + rb1))
        else:
            l0, l1, l2 = ggx_sample(n0, n1, n2, v0, v1, v2, alpha, _wrap(a + rb0), _wrap(b + rb1))
        cos = n0 * l0 + n1 * l1 + n2 * l2
        if cos <= 0.0:
            continue
        ln = math.sqrt(l0 * l0 + l1 * l1 + l2 * l2)
        l0, l1, l2 = l0 / ln, l1 / ln, l2 / ln
        cos = n0 * l0 + n1 * l1 + n2 * l2
        pb = _brdf_pdf(pas, n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha)
        if pb <= 0.0:
            continue
        f = _brdf(pas, n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha, f0)
        if f <= 0.0:
            continue
        if occluded(bvh_lo, bvh_hi, bvh_l, bvh_r, bvh_s, bvh_c, tris,
                    o0, o1, o2, l0, l1, l2, 0.0, max_dist):
            continue
        pl = env_pdf(lum, total, l0, l1, l2)
        u, v = env_lookup(env, l0, l1, l2)
        wgt = f * cos / (pl + pb)
        acc0 += wgt * env[v, u, 0]
        acc1 += wgt * env[v, u, 1]
        acc2 += wgt * env[v, u, 2]
    out[0] += acc0 / spp
    out[1] += acc1 / spp
    out[2] += acc2 / spp


@njit(cache=True, parallel=True, error_model="numpy")
def render_frame(bvh_lo, bvh_hi, bvh_l, bvh_r, bvh_s, bvh_c, tris, env, lum, row_cdf, col_cdf, total,
                 rot, pos, fx, fy, cx, cy, width, height, passes, spps, alphas, f0, eps, max_dist,
                 seed, frame, out):
    """Render the requested passes of one frame into out[pass, y, x, rgb]."""
    has_geom = tris.shape[0] > 0
    for py in prange(height):
        for px in range(width):
            # primary ray through the pixel center, camera looks down -z
            cx_ = (px + 0.5 - cx) / fx
            cy_ = -(py + 0.5 - cy) / fy
            d0 = rot[0, 0] * cx_ + rot[0, 1] * cy_ - rot[0, 2]
            d1 = rot[1, 0] * cx_ + rot[1, 1] * cy_ - rot[1, 2]
            d2 = rot[2, 0] * cx_ + rot[2, 1] * cy_ - rot[2, 2]
            dn = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            d0, d1, d2 = d0 / dn, d1 / dn, d2 / dn
            t, k = np.inf, -1
            if has_geom:
                t, k, _, _, _ = nearest_hit(bvh_lo, bvh_hi, bvh_l, bvh_r, bvh_s, bvh_c, tris,
                                            pos[0], pos[1], pos[2], d0, d1, d2, 0.0, np.inf)
            if k < 0:
                u, v = env_lookup(env, d0, d1, d2)
                for p in range(3):
                    if passes[p]:
                        out[p, py, px, 0] = env[v, u, 0]
                        out[p, py, px, 1] = env[v, u, 1]
                        out[p, py, px, 2] = env[v, u, 2]
                continue
            tri = tris[k]
            e10, e11, e12 = tri[1, 0] - tri[0, 0], tri[1, 1] - tri[0, 1], tri[1, 2] - tri[0, 2]
            e20, e21, e22 = tri[2, 0] - tri[0, 0], tri[2, 1] - tri[0, 1], tri[2, 2] - tri[0, 2]
            n0 = e11 * e22 - e12 * e21
            n1 = e12 * e20 - e10 * e22
            n2 = e10 * e21 - e11 * e20
            nn = math.sqrt(n0 * n0 + n1 * n1 + n2 * n2)
            n0, n1, n2 = n0 / nn, n1 / nn, n2 / nn
            if n0 * d0 + n1 * d1 + n2 * d2 > 0.0:
                n0, n1, n2 = -n0, -n1, -n2
            p0, p1, p2 = pos[0] + t * d0, pos[1] + t * d1, pos[2] + t * d2
            for p in range(3):
                if not passes[p]:
                    continue
                shade(bvh_lo, bvh_hi, bvh_l, bvh_r, bvh_s, bvh_c, tris, env, lum, row_cdf, col_cdf,
                      total, p0, p1, p2, n0, n1, n2, -d0, -d1, -d2, p, spps[p], alphas[p], f0,
                      eps, max_dist, seed, frame, px, py, out[p, py, px])
