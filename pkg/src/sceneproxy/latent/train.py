"""Staged adapter training on small rendered toy sets.

Stage A trains the proxy encoder and the injection weight; stages B and C
also train the low-rank factors, and stage C alternates batches between a
synthetic and a "real" source.
"""

from dataclasses import dataclass, field

import numpy as np

from ..camera import plan_camera
from ..dsl import CameraClause
from ..errors import BadParameter, EmptyDataset, MissingSource
from ..geometry import IDENTITY_QUAT
from ..scene import SceneAssembly, SceneGraph, SceneNode
from .codec import encode_latent
from .model import flatten, group_of, loss_and_grads, unflatten

STAGE_GROUPS = {"A": ("encoder", "alpha"), "B": ("encoder", "alpha", "lora"),
                "C": ("encoder", "alpha", "lora")}


@dataclass(frozen=True)
class StageConfig:
    stage: str = "A"
    steps: int = 100
    batch_size: int = 8
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.stage not in STAGE_GROUPS:
            raise BadParameter(f"unknown stage {self.stage!r}")
        if self.steps < 0 or self.batch_size < 1:
            raise BadParameter("steps must be >= 0 and batch_size >= 1")

    @property
    def trainable(self):
        return STAGE_GROUPS[self.stage]

    @property
    def mix(self):
        """real:syn batch ratio."""
        return (1, 1) if self.stage == "C" else (0, 1)


@dataclass
class ToyDataset:
    proxies: np.ndarray   # N x 9 x H x W
    latents: np.ndarray   # N x 4 x H/16 x W/16
    name: str = "syn"

    def __len__(self):
        return len(self.proxies)


@dataclass
class StageResult:
    state: object
    denoiser: object
    losses: list
    sources: list = field(default_factory=list)


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k in sorted(grads):
            g = grads[k]
            m = self.m[k] = self.b1 * self.m.get(k, 0.0) + (1 - self.b1) * g
            v = self.v[k] = self.b2 * self.v.get(k, 0.0) + (1 - self.b2) * g * g
            params[k] = params[k] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _Stream:
    """Endless reshuffled index stream over one dataset."""

    def __init__(self, n, rng):
        self.n, self.rng, self.buf = n, rng, []

    def take(self, k):
        out = []
        while len(out) < k:
            if not self.buf:
                self.buf = list(self.rng.permutation(self.n))
            out.append(self.buf.pop(0))
        return np.array(out)


def source_schedule(stage, steps):
    """Source label of each batch: alternating syn/real in stage C."""
    if stage == "C":
        return ["syn" if k % 2 == 0 else "real" for k in range(steps)]
    return ["syn"] * steps


def run_stage(config, state, denoiser, syn, real=None, on_step=None):
    """Train the stage's parameter groups with Adam; returns a `StageResult`
    with new state/denoiser values and the per-step loss trace."""
    if syn is None or len(syn) == 0:
        raise EmptyDataset("training set is empty")
    if config.stage == "C":
        if real is None:
            raise MissingSource("stage C needs a second (real) data source")
        if len(real) == 0:
            raise EmptyDataset("real data source is empty")
    p = {k: np.array(v, dtype=np.float64) for k, v in flatten(state, denoiser).items()}
    groups = set(config.trainable)
    rng = np.random.default_rng([config.seed, 7])
    streams = {"syn": _Stream(len(syn), rng)}
    data = {"syn": syn}
    if config.stage == "C":
        streams["real"] = _Stream(len(real), rng)
        data["real"] = real
    opt = Adam(config.lr, config.beta1, config.beta2, config.eps)
    losses = []
    schedule = source_schedule(config.stage, config.steps)
    for step, src in enumerate(schedule):
        ds = data[src]
        idx = streams[src].take(config.batch_size)
        z = ds.latents[idx]
        t = rng.random(len(idx))
        eps = rng.standard_normal(z.shape)
        tb = t[:, None, None, None]
        z_t = tb * z + (1.0 - tb) * eps
        loss, grads, _ = loss_and_grads(p, ds.proxies[idx], z_t, t, z - eps, groups)
        grads = {k: g for k, g in grads.items() if group_of(k) in groups}
        opt.step(p, grads)
        losses.append(loss)
        if on_step is not None:
            on_step(step, loss)
    new_state, new_den = unflatten(p)
    return StageResult(new_state, new_den, losses, schedule)


def evaluate_loss(state, denoiser, ds, seed=0, batch=None):
    """Flow loss over a dataset with a fixed noise/time draw."""
    rng = np.random.default_rng([seed, 11])
    idx = np.arange(len(ds)) if batch is None else np.arange(min(batch, len(ds)))
    z = ds.latents[idx]
    t = rng.random(len(idx))
    eps = rng.standard_normal(z.shape)
    tb = t[:, None, None, None]
    p = flatten(state, denoiser)
    return loss_and_grads(p, ds.proxies[idx], tb * z + (1 - tb) * eps, t, z - eps, set())[0]


# -- toy data ------------------------------------------------------------------------

# per-source asset pools and pass weights used to composite the target frame
TOY_SOURCES = {
    "syn": {"assets": ("table_01", "crate_01", "vase_01", "ball_01"),
            "weights": (0.7, 0.2, 0.1), "warmth": (0.0, 0.6)},
    "real": {"assets": ("chair_01", "lamp_01", "cup_01", "book_01"),
             "weights": (0.5, 0.3, 0.2), "warmth": (0.4, 1.0)},
}


def _single_object(mesh, asset_id):
    lo, hi = mesh.bounds()
    node = SceneNode("object_0", asset_id.split("_")[0], (), asset_id, IDENTITY_QUAT.copy(),
                     np.zeros(3), 1.0 / float(np.max(hi - lo)))
    return SceneAssembly(SceneGraph([node], []), [mesh], 0.0, [])


def make_toy_dataset(n=64, size=32, seed=0, source="syn", spp=8):
    """Render `n` single-frame proxies of one demo object under random
    procedural skies and camera azimuths; the target latent encodes a fixed
    blend of the three passes."""
    from ..assets import demo_mesh
    from ..envlight import procedural_sky
    from ..render import RenderSettings, render_proxy

    if source not in TOY_SOURCES:
        raise BadParameter(f"unknown toy source {source!r}")
    cfg = TOY_SOURCES[source]
    rng = np.random.default_rng([seed, 3, list(TOY_SOURCES).index(source)])
    settings = RenderSettings(width=size, height=size, spp_diffuse=spp, spp_glossy=spp, seed=seed)
    scenes = {a: _single_object(demo_mesh(a), a) for a in cfg["assets"]}
    w = np.repeat(np.array(cfg["weights"]), 3)[:, None, None]
    proxies, latents = [], []
    for i in range(n):
        asset = cfg["assets"][rng.integers(len(cfg["assets"]))]
        env = procedural_sky(rng.uniform(0, 360), rng.uniform(10, 70),
                             rng.uniform(*cfg["warmth"]), resolution=16)
        clause = CameraClause("static", (("azimuth", float(rng.uniform(0, 360))),
                                         ("elevation", float(rng.uniform(5, 40)))))
        traj = plan_camera(clause, scenes[asset], 2, size, size)
        y = render_proxy(scenes[asset], env, traj.poses[:1], [0.0], settings).data[0]
        y = y.astype(np.float64)
        frame = (w * y).reshape(3, 3, size, size).sum(axis=0).transpose(1, 2, 0)
        proxies.append(y)
        latents.append(encode_latent(frame))
    return ToyDataset(np.stack(proxies), np.stack(latents), source)
