"""Fixed linear patch codec: each 16x16x3 patch maps to 4 numbers by
projection onto orthonormal rows, and decoding is the transpose."""

import numpy as np

from ..errors import DimensionError

PATCH = 16
LATENT_CHANNELS = 4


def _basis():
    x = np.arange(PATCH)
    mode = np.cos(np.pi * (x + 0.5) / PATCH)
    ones = np.ones(PATCH)
    rgb = np.ones(3)
    rows = [
        np.einsum("y,x,c->yxc", ones, ones, rgb),          # luminance DC
        np.einsum("y,x,c->yxc", ones, mode, rgb),          # horizontal first mode
        np.einsum("y,x,c->yxc", mode, ones, rgb),          # vertical first mode
        np.einsum("y,x,c->yxc", ones, ones, [1.0, 0.0, -1.0]),  # R - B chroma
    ]
    B = np.stack([r.ravel() for r in rows])
    return B / np.linalg.norm(B, axis=1, keepdims=True)


BASIS = _basis()  # (4, 768), orthonormal rows over (y, x, c) patch entries


def _check(h, w):
    if h % PATCH or w % PATCH or h == 0 or w == 0:
        raise DimensionError(f"frame size {h}x{w} is not a positive multiple of {PATCH}")


def encode_latent(frame):
    """H x W x 3 image -> 4 x H/16 x W/16 latent."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3, got {frame.shape}")
    h, w, _ = frame.shape
    _check(h, w)
    patches = frame.reshape(h // PATCH, PATCH, w // PATCH, PATCH, 3).transpose(0, 2, 1, 3, 4)
    code = patches.reshape(h // PATCH, w // PATCH, -1) @ BASIS.T
    return code.transpose(2, 0, 1)


def decode_latent(latent):
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim != 3 or latent.shape[0] != LATENT_CHANNELS:
        raise DimensionError(f"expected 4 x h x w latent, got {latent.shape}")
    _, h, w = latent.shape
    patches = (latent.transpose(1, 2, 0) @ BASIS).reshape(h, w, PATCH, PATCH, 3)
    return patches.transpose(0, 2, 1, 3, 4).reshape(h * PATCH, w * PATCH, 3)


def encode_video(frames):
    """F x H x W x 3 -> F x 4 x H/16 x W/16."""
    return np.stack([encode_latent(f) for f in frames])
