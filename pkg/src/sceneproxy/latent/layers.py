"""Float64 layer primitives with explicit backward passes.

Each forward returns ``(output, cache)``; the matching backward takes the
cache and the output gradient and returns the input gradient plus a dict of
parameter gradients.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

GN_EPS = 1e-5


def _im2col(x, k, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    return cols, xp.shape, (n, ho, wo)


def conv2d(x, w, b, stride=1, pad=0):
    """x: N x Cin x H x W, w: Cout x Cin x k x k, b: Cout."""
    cout, cin, k, _ = w.shape
    cols, xp_shape, (n, ho, wo) = _im2col(x, k, stride, pad)
    y = cols @ w.reshape(cout, -1).T + b
    y = y.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)
    return y, (cols, xp_shape, w, stride, pad)


def conv2d_backward(cache, dy):
    cols, xp_shape, w, stride, pad = cache
    cout, cin, k, _ = w.shape
    n, _, ho, wo = dy.shape
    dyf = dy.transpose(0, 2, 3, 1).reshape(-1, cout)
    dw = (dyf.T @ cols).reshape(w.shape)
    db = dyf.sum(axis=0)
    dcols = (dyf @ w.reshape(cout, -1)).reshape(n, ho, wo, cin, k, k)
    dxp = np.zeros(xp_shape)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if pad:
        dxp = dxp[:, :, pad:-pad, pad:-pad]
    return dxp, dw, db


def group_norm(x, gamma, beta, groups, eps=GN_EPS):
    n, c, h, w = x.shape
    xg = x.reshape(n, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(x.shape)
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, (xhat, inv, gamma, groups)


def group_norm_backward(cache, dy):
    xhat, inv, gamma, groups = cache
    n = xhat.shape[0]
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxh = (dy * gamma[None, :, None, None]).reshape(n, groups, -1)
    xh = xhat.reshape(n, groups, -1)
    dx = inv * (dxh - dxh.mean(axis=2, keepdims=True)
                - xh * (dxh * xh).mean(axis=2, keepdims=True))
    return dx.reshape(xhat.shape), dgamma, dbeta


def silu(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s, (x, s)


def silu_backward(cache, dy):
    x, s = cache
    return dy * s * (1.0 + x * (1.0 - s))


def fourier_features(t, channels=8):
    """Sin/cos of t at octave frequencies: N -> N x channels."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = np.pi * 2.0 ** np.arange(channels // 2)
    ang = t[:, None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def fourier_features_dt(t, channels=8):
    """d features / d t, N x channels."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = np.pi * 2.0 ** np.arange(channels // 2)
    ang = t[:, None] * freqs
    return np.concatenate([freqs * np.cos(ang), -freqs * np.sin(ang)], axis=1)


def mse(pred, target):
    d = pred - target
    return float(np.mean(d * d)), 2.0 * d / d.size
