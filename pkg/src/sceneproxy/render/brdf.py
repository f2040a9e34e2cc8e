"""GGX microfacet BRDF (Cook-Torrance with height-correlated Smith masking
and Schlick Fresnel) and the matching sampling routines.

`roughness` is the GGX alpha used directly in D(h).
"""

import math

import numpy as np
from numba import njit

INV_PI = 1.0 / math.pi


@njit(cache=True, error_model="numpy")
def ggx_d(nh, alpha):
    """GGX normal distribution for cos(theta_h) = nh."""
    if nh <= 0.0:
        return 0.0
    a2 = alpha * alpha
    k = nh * nh * (a2 - 1.0) + 1.0
    return a2 / (math.pi * k * k)


@njit(cache=True, error_model="numpy")
def smith_lambda(c, alpha):
    if c >= 1.0:
        return 0.0
    tan2 = (1.0 - c * c) / (c * c)
    return 0.5 * (-1.0 + math.sqrt(1.0 + alpha * alpha * tan2))


@njit(cache=True, error_model="numpy")
def smith_g2(nv, nl, alpha):
    """Height-correlated masking-shadowing."""
    return 1.0 / (1.0 + (smith_lambda(nv, alpha) + smith_lambda(nl, alpha)))


@njit(cache=True, error_model="numpy")
def schlick(vh, f0):
    m = 1.0 - vh
    m2 = m * m
    return f0 + (1.0 - f0) * m2 * m2 * m


@njit(cache=True, error_model="numpy")
def ggx_eval(n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha, f0):
    nv = n0 * v0 + n1 * v1 + n2 * v2
    nl = n0 * l0 + n1 * l1 + n2 * l2
    if nv <= 0.0 or nl <= 0.0:
        return 0.0
    h0, h1, h2 = v0 + l0, v1 + l1, v2 + l2
    hn = math.sqrt(h0 * h0 + h1 * h1 + h2 * h2)
    if hn == 0.0:
        return 0.0
    h0, h1, h2 = h0 / hn, h1 / hn, h2 / hn
    nh = n0 * h0 + n1 * h1 + n2 * h2
    # v.h and l.h agree analytically; averaging keeps the swap symmetry exact
    vh = 0.5 * ((v0 * h0 + v1 * h1 + v2 * h2) + (l0 * h0 + l1 * h1 + l2 * h2))
    denom = 4.0 * nv * nl
    g = smith_g2(nv, nl, alpha)
    if denom == 0.0 or g == 0.0:
        return 0.0
    return ggx_d(nh, alpha) * schlick(min(max(vh, 0.0), 1.0), f0) * g / denom


@njit(cache=True, error_model="numpy")
def ggx_pdf(n0, n1, n2, v0, v1, v2, l0, l1, l2, alpha):
    """Solid-angle density of `ggx_sample` producing direction l."""
    h0, h1, h2 = v0 + l0, v1 + l1, v2 + l2
    hn = math.sqrt(h0 * h0 + h1 * h1 + h2 * h2)
    if hn == 0.0:
        return 0.0
    h0, h1, h2 = h0 / hn, h1 / hn, h2 / hn
    nh = n0 * h0 + n1 * h1 + n2 * h2
    vh = v0 * h0 + v1 * h1 + v2 * h2
    if nh <= 0.0 or vh <= 0.0:
        return 0.0
    return ggx_d(nh, alpha) * nh / (4.0 * vh)


@njit(cache=True, error_model="numpy")
def onb(n0, n1, n2):
    """Orthonormal tangent frame (Duff et al. 2017)."""
    s = 1.0 if n2 >= 0.0 else -1.0
    a = -1.0 / (s + n2)
    b = n0 * n1 * a
    return (1.0 + s * n0 * n0 * a, s * b, -s * n0), (b, s + n1 * n1 * a, -n1)


@njit(cache=True, error_model="numpy")
def ggx_sample(n0, n1, n2, v0, v1, v2, alpha, u1, u2):
    """Reflect v about a half vector drawn from D(h) cos(theta_h)."""
    t, b = onb(n0, n1, n2)
    tan2 = alpha * alpha * u1 / (1.0 - u1)
    ct = 1.0 / math.sqrt(1.0 + tan2)
    st = math.sqrt(max(0.0, 1.0 - ct * ct))
    phi = 2.0 * math.pi * u2
    x, y = st * math.cos(phi), st * math.sin(phi)
    h0 = x * t[0] + y * b[0] + ct * n0
    h1 = x * t[1] + y * b[1] + ct * n1
    h2 = x * t[2] + y * b[2] + ct * n2
    vh = v0 * h0 + v1 * h1 + v2 * h2
    return 2.0 * vh * h0 - v0, 2.0 * vh * h1 - v1, 2.0 * vh * h2 - v2


@njit(cache=True, error_model="numpy")
def cosine_sample(n0, n1, n2, u1, u2):
    t, b = onb(n0, n1, n2)
    r = math.sqrt(u1)
    phi = 2.0 * math.pi * u2
    x, y = r * math.cos(phi), r * math.sin(phi)
    z = math.sqrt(max(0.0, 1.0 - u1))
    return (x * t[0] + y * b[0] + z * n0, x * t[1] + y * b[1] + z * n1,
            x * t[2] + y * b[2] + z * n2)


def ggx_brdf(n, v, l, roughness, f0):
    """Cook-Torrance GGX reflectance for unit vectors n, v, l (0 below the
    horizon of either direction)."""
    n, v, l = (np.asarray(x, dtype=float) for x in (n, v, l))
    return float(ggx_eval(n[0], n[1], n[2], v[0], v[1], v[2], l[0], l[1], l[2],
                          float(roughness), float(f0)))


def ggx_ndf(cos_theta_h, roughness):
    return float(ggx_d(float(cos_theta_h), float(roughness)))
