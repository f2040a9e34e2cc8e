"""Proxy encoder, toy velocity denoiser with low-rank adapters, residual
injection, and the flow-matching objective.

Internally every parameter lives in one flat dict keyed by dotted names;
the first component names its group: ``encoder``, ``alpha``, ``lora`` or
``base``.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import BadT, DimensionError, ShapeMismatch
from .codec import LATENT_CHANNELS, PATCH
from .layers import (
    conv2d,
    conv2d_backward,
    fourier_features,
    group_norm,
    group_norm_backward,
    mse,
    silu,
    silu_backward,
)

ENCODER_CHANNELS = (9, 16, 32, 32, 16)
GROUPS = 4
TIME_CHANNELS = 8
HIDDEN = 32
LORA_RANK = 2
DENOISER_LAYERS = ((LATENT_CHANNELS + TIME_CHANNELS, HIDDEN), (HIDDEN, HIDDEN),
                   (HIDDEN, LATENT_CHANNELS))


@dataclass
class AdapterState:
    encoder: dict
    alpha: float = 0.0
    lora: dict = field(default_factory=dict)

    def copy(self):
        return AdapterState({k: v.copy() for k, v in self.encoder.items()}, float(self.alpha),
                            {k: v.copy() for k, v in self.lora.items()})


@dataclass
class ToyDenoiser:
    base: dict

    def copy(self):
        return ToyDenoiser({k: v.copy() for k, v in self.base.items()})

    def digest(self):
        """sha256 over the base weights in name order."""
        h = hashlib.sha256()
        for k in sorted(self.base):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.base[k]).tobytes())
        return h.hexdigest()


def _he(rng, shape, gain=2.0):
    fan_in = int(np.prod(shape[1:]))
    return rng.normal(0.0, np.sqrt(gain / fan_in), shape)


def init_adapter(seed=0, rank=LORA_RANK):
    rng = np.random.default_rng([seed, 1])
    enc = {}
    for i, (a, b) in enumerate(zip(ENCODER_CHANNELS, ENCODER_CHANNELS[1:])):
        enc[f"{i}.weight"] = _he(rng, (b, a, 3, 3))
        enc[f"{i}.bias"] = np.zeros(b)
        enc[f"{i}.gamma"] = np.ones(b)
        enc[f"{i}.beta"] = np.zeros(b)
    enc["out.weight"] = _he(rng, (LATENT_CHANNELS, ENCODER_CHANNELS[-1], 1, 1), 1.0)
    enc["out.bias"] = np.zeros(LATENT_CHANNELS)
    lora = {}
    for i, (a, b) in enumerate(DENOISER_LAYERS):
        lora[f"{i}.A"] = rng.normal(0.0, 1.0 / np.sqrt(a * 9), (rank, a * 9))
        lora[f"{i}.B"] = np.zeros((b, rank))
    return AdapterState(enc, 0.0, lora)


def init_denoiser(seed=0):
    rng = np.random.default_rng([seed, 2])
    base = {}
    for i, (a, b) in enumerate(DENOISER_LAYERS):
        last = i == len(DENOISER_LAYERS) - 1
        base[f"{i}.weight"] = _he(rng, (b, a, 3, 3), 1.0 if last else 2.0)
        base[f"{i}.bias"] = np.zeros(b)
    return ToyDenoiser(base)


def flatten(state, denoiser):
    p = {f"encoder.{k}": v for k, v in state.encoder.items()}
    p["alpha"] = np.array(float(state.alpha))
    p.update({f"lora.{k}": v for k, v in state.lora.items()})
    p.update({f"base.{k}": v for k, v in denoiser.base.items()})
    return p


def unflatten(p):
    def group(g):
        return {k[len(g) + 1:]: np.array(v, dtype=np.float64) for k, v in p.items()
                if k.startswith(g + ".")}
    return AdapterState(group("encoder"), float(p["alpha"]), group("lora")), ToyDenoiser(group("base"))


def group_of(name):
    return name.split(".", 1)[0]


# -- proxy encoder --------------------------------------------------------------

def _check_frame_size(h, w):
    if h % PATCH or w % PATCH or not h or not w:
        raise DimensionError(f"proxy size {h}x{w} is not a positive multiple of {PATCH}")


def _encoder_forward(p, y):
    caches = []
    x = y
    for i in range(len(ENCODER_CHANNELS) - 1):
        x, cc = conv2d(x, p[f"encoder.{i}.weight"], p[f"encoder.{i}.bias"], stride=2, pad=1)
        x, cg = group_norm(x, p[f"encoder.{i}.gamma"], p[f"encoder.{i}.beta"], GROUPS)
        x, cs = silu(x)
        caches.append((cc, cg, cs))
    x, co = conv2d(x, p["encoder.out.weight"], p["encoder.out.bias"])
    return x, (caches, co)


def _encoder_backward(cache, dz):
    caches, co = cache
    g = {}
    dx, g["encoder.out.weight"], g["encoder.out.bias"] = conv2d_backward(co, dz)
    for i in reversed(range(len(caches))):
        cc, cg, cs = caches[i]
        dx = silu_backward(cs, dx)
        dx, g[f"encoder.{i}.gamma"], g[f"encoder.{i}.beta"] = group_norm_backward(cg, dx)
        dx, g[f"encoder.{i}.weight"], g[f"encoder.{i}.bias"] = conv2d_backward(cc, dx)
    return g


def encode_proxy(y, state):
    """F x 9 x H x W proxy -> F x 4 x H/16 x W/16 condition features."""
    y = np.asarray(getattr(y, "data", y), dtype=np.float64)
    if y.ndim != 4 or y.shape[1] != ENCODER_CHANNELS[0]:
        raise DimensionError(f"expected F x 9 x H x W proxy, got {y.shape}")
    _check_frame_size(*y.shape[2:])
    p = {f"encoder.{k}": v for k, v in state.encoder.items()}
    return _encoder_forward(p, y)[0]


# -- residual injection and denoiser ---------------------------------------------

def inject_residual(z, z_y, alpha):
    z, z_y = np.asarray(z), np.asarray(z_y)
    if z.shape != z_y.shape:
        raise ShapeMismatch(f"latent {z.shape} vs condition {z_y.shape}")
    return z + alpha * z_y


def _weight(p, i):
    w = p[f"base.{i}.weight"]
    a, b = p.get(f"lora.{i}.A"), p.get(f"lora.{i}.B")
    if a is None:
        return w
    return w + (b @ a).reshape(w.shape)


def _denoiser_forward(p, zp, t):
    n, _, h, w = zp.shape
    tf = np.broadcast_to(fourier_features(np.broadcast_to(t, (n,)))[:, :, None, None],
                         (n, TIME_CHANNELS, h, w))
    x = np.concatenate([zp, tf], axis=1)
    caches = []
    last = len(DENOISER_LAYERS) - 1
    for i in range(len(DENOISER_LAYERS)):
        x, cc = conv2d(x, _weight(p, i), p[f"base.{i}.bias"], pad=1)
        cs = None
        if i < last:
            x, cs = silu(x)
        caches.append((cc, cs))
    return x, caches


def _denoiser_backward(p, caches, dout, want):
    """Gradients of the requested groups plus d/d(z') (input latent)."""
    g = {}
    dx = dout
    for i in reversed(range(len(caches))):
        cc, cs = caches[i]
        if cs is not None:
            dx = silu_backward(cs, dx)
        dx, dw, db = conv2d_backward(cc, dx)
        if "base" in want:
            g[f"base.{i}.weight"], g[f"base.{i}.bias"] = dw, db
        if "lora" in want and f"lora.{i}.A" in p:
            a, b = p[f"lora.{i}.A"], p[f"lora.{i}.B"]
            dwf = dw.reshape(dw.shape[0], -1)
            g[f"lora.{i}.A"] = b.T @ dwf
            g[f"lora.{i}.B"] = dwf @ a.T
    return g, dx[:, :LATENT_CHANNELS]


def _forward(p, z_t, t, y=None, z_y=None):
    if z_y is None:
        z_y, enc_cache = _encoder_forward(p, y)
    else:
        enc_cache = None
    zp = inject_residual(z_t, z_y, float(p["alpha"]))
    out, den_cache = _denoiser_forward(p, zp, t)
    return out, (z_y, enc_cache, den_cache)


def forward_denoise(z_t, t, z_y, state, denoiser):
    """Velocity prediction on z_t + alpha * z_y (N x 4 x h x w)."""
    z_t = np.asarray(z_t, dtype=np.float64)
    if z_t.ndim != 4 or z_t.shape[1] != LATENT_CHANNELS:
        raise ShapeMismatch(f"expected N x 4 x h x w latent, got {z_t.shape}")
    return _forward(flatten(state, denoiser), z_t, t, z_y=np.asarray(z_y, dtype=np.float64))[0]


def loss_and_grads(p, y, z_t, t, v, trainable):
    """Flow loss and gradients for the parameter groups in `trainable`.

    Returns ``(loss, grads, extras)`` with extras holding ``dz_prime`` (the
    loss gradient at the injected latent) and ``z_y``.
    """
    out, (z_y, enc_cache, den_cache) = _forward(p, z_t, t, y=y)
    loss, dout = mse(out, v)
    grads, dzp = _denoiser_backward(p, den_cache, dout, set(trainable))
    if "alpha" in trainable:
        grads["alpha"] = np.array(float(np.sum(dzp * z_y)))
    if "encoder" in trainable:
        grads.update(_encoder_backward(enc_cache, float(p["alpha"]) * dzp))
    return loss, grads, {"dz_prime": dzp, "z_y": z_y}


# -- flow matching ---------------------------------------------------------------

@dataclass(frozen=True)
class FlowSample:
    z: np.ndarray
    eps: np.ndarray
    t: float
    z_t: np.ndarray
    v_t: np.ndarray


def _check_t(t):
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise BadT(f"t = {t} outside [0, 1]")
    return t


def flow_interpolate(z, eps, t):
    t = _check_t(t)
    return FlowSample(z, eps, t, t * z + (1.0 - t) * eps, z - eps)


def sample_flow(z, seed, t):
    z = np.asarray(z, dtype=np.float64)
    _check_t(t)
    eps = np.random.default_rng(seed).standard_normal(z.shape)
    return flow_interpolate(z, eps, t)


def flow_loss(prediction, v_t):
    prediction, v_t = np.asarray(prediction), np.asarray(v_t)
    if prediction.shape != v_t.shape:
        raise ShapeMismatch(f"prediction {prediction.shape} vs target {v_t.shape}")
    return mse(prediction, v_t)[0]


def euler_sample(velocity, eps, t_grid=(0.0, 0.5, 1.0)):
    """Integrate dz/dt = velocity(z, t) from noise at t_grid[0] to t_grid[-1]."""
    z = np.array(eps, dtype=np.float64)
    for t0, t1 in zip(t_grid, t_grid[1:]):
        z = z + (t1 - t0) * velocity(z, t0)
    return z
