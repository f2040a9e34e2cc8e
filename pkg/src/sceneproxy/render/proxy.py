"""Render-pass stacks (diffuse, rough GGX, glossy GGX) and their file format."""

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from PIL import Image

from ..camera import CameraPose
from ..envlight import rotate_envmap
from ..errors import (
    BadMagic,
    BadParameter,
    DegenerateCamera,
    DimensionMismatch,
    LengthMismatch,
    TruncatedFile,
)
from ..geometry import quat_to_matrix
from .bvh import build_bvh
from .kernels import env_distribution, render_frame

PASSES = ("DIFF", "GGX1", "GGX2")
CHANNELS = 9
LPXY_MAGIC = b"LPXY"
LPXY_VERSION = 1
_HEADER = struct.Struct("<4s5I")

# the bundled TBB is too old for numba; avoid the warning and fall back quietly
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"


@dataclass(frozen=True)
class RenderSettings:
    width: int = 128
    height: int = 128
    spp_diffuse: int = 64
    spp_glossy: int = 128
    roughness_rough: float = 0.34
    roughness_glossy: float = 0.05
    f0: float = 1.0
    seed: int = 0
    max_shadow_distance: float = 1e4
    shadow_epsilon: float = 1e-4

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise BadParameter("image size must be positive")
        if self.spp_diffuse < 1 or self.spp_glossy < 1:
            raise BadParameter("sample counts must be positive")
        for r in (self.roughness_rough, self.roughness_glossy):
            if not 0.0 < r <= 1.0:
                raise BadParameter(f"roughness {r} outside (0, 1]")
        if not self.roughness_glossy < self.roughness_rough:
            raise BadParameter("glossy roughness must be below rough roughness")
        if not 0 <= self.seed < 2**64:
            raise BadParameter("seed must fit in 64 bits")
        if not self.max_shadow_distance > 0:
            raise BadParameter("max_shadow_distance must be positive")


class ProxyStack:
    """F x 9 x H x W float32 radiance, channels DIFF.rgb, GGX1.rgb, GGX2.rgb."""

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim != 4 or data.shape[1] != CHANNELS:
            raise DimensionMismatch(f"proxy stack must be F x 9 x H x W, got {data.shape}")
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise BadParameter("proxy radiance must be finite and non-negative")
        self.data = data

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[2]

    @property
    def width(self):
        return self.data.shape[3]

    @property
    def shape(self):
        return self.data.shape

    def pass_image(self, frame, kind):
        c = 3 * PASSES.index(kind)
        return self.data[frame, c:c + 3].transpose(1, 2, 0)


class _SceneCache:
    """BVH arrays for an assembly (or an empty dummy when it has no geometry)."""

    def __init__(self, assembly):
        tris = assembly.world_triangles() if assembly is not None else np.zeros((0, 3, 3))
        if len(tris):
            self.arrays = build_bvh(tris).arrays
        else:
            z = np.zeros((1, 3))
            i = np.full(1, -1, dtype=np.int64)
            self.arrays = (z, z, i, i, np.zeros(1, np.int64), np.zeros(1, np.int64),
                           np.zeros((0, 3, 3)))


def _check_pose(pose):
    if not isinstance(pose, CameraPose) or not pose.is_finite():
        raise DegenerateCamera("camera pose is not finite")


def _render(cache, env, pose, passes, settings, frame):
    _check_pose(pose)
    px = np.ascontiguousarray(env.pixels, dtype=np.float64)
    lum, row_cdf, col_cdf, total = env_distribution(px)
    out = np.zeros((3, settings.height, settings.width, 3))
    fx, fy, cx, cy = pose.intrinsics
    render_frame(*cache.arrays, px, lum, row_cdf, col_cdf, total,
                 quat_to_matrix(pose.rotation), np.asarray(pose.translation, dtype=float),
                 fx, fy, cx, cy, settings.width, settings.height,
                 np.array(passes, dtype=np.bool_),
                 np.array([settings.spp_diffuse, settings.spp_glossy, settings.spp_glossy],
                          dtype=np.int64),
                 np.array([1.0, settings.roughness_rough, settings.roughness_glossy]),
                 float(settings.f0), float(settings.shadow_epsilon),
                 float(settings.max_shadow_distance), np.uint64(settings.seed), frame, out)
    return out


def render_pass(assembly, env, pose, kind, settings=RenderSettings(), frame=0):
    """One H x W x 3 radiance image of pass `kind` ("DIFF", "GGX1" or "GGX2")."""
    if kind not in PASSES:
        raise BadParameter(f"unknown pass {kind!r}")
    p = PASSES.index(kind)
    flags = [i == p for i in range(3)]
    return _render(_SceneCache(assembly), env, pose, flags, settings, frame)[p]


def frame_key(pose, yaw):
    """RNG stream id of a frame, derived from what the frame shows rather than
    where it sits in the clip, so reordering frames reorders outputs exactly."""
    h = hashlib.blake2b(digest_size=8)
    for part in (pose.rotation, pose.translation, pose.intrinsics, [yaw]):
        h.update(np.asarray(part, dtype="<f8").tobytes())
    return int.from_bytes(h.digest(), "little") >> 1


def render_proxy(assembly, env, trajectory, schedule, settings=RenderSettings(), threads=None,
                 progress=None):
    """Render all three passes for every frame; frame k uses pose k and the
    env map rotated by schedule[k] degrees."""
    poses = list(trajectory.poses if hasattr(trajectory, "poses") else trajectory)
    schedule = list(schedule)
    if len(poses) != len(schedule):
        raise LengthMismatch(f"{len(poses)} poses but {len(schedule)} rotation angles")
    for pose in poses:
        _check_pose(pose)
    prev = numba.get_num_threads()
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    try:
        cache = _SceneCache(assembly)
        data = np.empty((len(poses), CHANNELS, settings.height, settings.width), np.float32)
        for k, (pose, yaw) in enumerate(zip(poses, schedule)):
            img = _render(cache, rotate_envmap(env, yaw), pose, [True] * 3, settings,
                          frame_key(pose, yaw))
            data[k] = img.transpose(0, 3, 1, 2).reshape(CHANNELS, settings.height, settings.width)
            if progress is not None:
                progress(k)
    finally:
        numba.set_num_threads(prev)
    return ProxyStack(data)


# -- LPXY frame files ----------------------------------------------------------

def encode_frame(planes, index):
    planes = np.asarray(planes, dtype="<f4")
    if planes.ndim != 3 or planes.shape[0] != CHANNELS:
        raise DimensionMismatch(f"frame must be 9 x H x W, got {planes.shape}")
    _, h, w = planes.shape
    return _HEADER.pack(LPXY_MAGIC, LPXY_VERSION, index, h, w, CHANNELS) + planes.tobytes()


def decode_frame(data, source="<bytes>"):
    """(frame index, 9 x H x W float32 planes)."""
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{source}: header truncated")
    magic, version, index, h, w, c = _HEADER.unpack_from(data)
    if magic != LPXY_MAGIC:
        raise BadMagic(f"{source}: not an LPXY file")
    if version != LPXY_VERSION or c != CHANNELS:
        raise BadMagic(f"{source}: unsupported version {version} / channels {c}")
    n = c * h * w * 4
    if len(data) < _HEADER.size + n:
        raise TruncatedFile(f"{source}: expected {n} payload bytes")
    planes = np.frombuffer(data, dtype="<f4", count=c * h * w, offset=_HEADER.size)
    return index, planes.reshape(c, h, w).astype(np.float32)


def save_proxy(stack, directory, pattern="frame_{:05d}.lpxy"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(stack.frames):
        path = directory / pattern.format(k)
        path.write_bytes(encode_frame(stack.data[k], k))
        paths.append(path)
    return paths


def load_proxy(directory, pattern="frame_*.lpxy"):
    files = sorted(Path(directory).glob(pattern))
    if not files:
        raise TruncatedFile(f"{directory}: no proxy frames")
    frames = []
    for k, path in enumerate(files):
        index, planes = decode_frame(path.read_bytes(), str(path))
        if index != k:
            raise BadMagic(f"{path}: frame index {index}, expected {k}")
        frames.append(planes)
    return ProxyStack(np.stack(frames))


# -- previews --------------------------------------------------------------------

def tonemap(x):
    """Reinhard x / (1 + x) followed by the sRGB transfer curve, as uint8."""
    x = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    y = x / (1.0 + x)
    s = np.where(y <= 0.0031308, 12.92 * y, 1.055 * np.power(y, 1 / 2.4) - 0.055)
    return np.clip(np.rint(s * 255.0), 0, 255).astype(np.uint8)


def save_previews(stack, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(stack.frames):
        for kind in PASSES:
            path = directory / f"{kind.lower()}_{k:05d}.png"
            Image.fromarray(tonemap(stack.pass_image(k, kind))).save(path)
            paths.append(path)
    return paths
