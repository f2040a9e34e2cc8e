"""Equirectangular HDR environment maps: I/O (Radiance RGBE and raw LENV),
yaw rotation, tag-based selection and a procedural sky.

Pixel (u, v) covers longitude phi = 2*pi*(u + 0.5)/W - pi and colatitude
theta = pi*(v + 0.5)/H; its direction is
(sin(theta) sin(phi), cos(theta), -sin(theta) cos(phi)), so the top row is
near +y and phi = 0 looks down -z.
"""

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, BadParameter, DimensionMismatch, FormatError, TruncatedFile

LENV_MAGIC = b"LENV"
LENV_VERSION = 1
PROCEDURAL_FALLBACK = "<procedural>"
LUMINANCE = np.array([0.2126, 0.7152, 0.0722])


class EnvMap:
    """Immutable H x W x 3 float32 radiance grid with W = 2H."""

    __slots__ = ("_pixels",)

    def __init__(self, pixels):
        px = np.array(pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionMismatch(f"env map must be H x W x 3, got {px.shape}")
        h, w = px.shape[:2]
        if h < 1 or w != 2 * h:
            raise DimensionMismatch(f"env map width must be twice its height, got {w}x{h}")
        if not np.all(np.isfinite(px)) or np.any(px < 0):
            raise BadParameter("env map radiance must be finite and non-negative")
        px.flags.writeable = False
        self._pixels = px

    @property
    def pixels(self):
        return self._pixels

    @property
    def height(self):
        return self._pixels.shape[0]

    @property
    def width(self):
        return self._pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, EnvMap) and np.array_equal(self._pixels, other._pixels)

    def __repr__(self):
        return f"EnvMap({self.width}x{self.height})"

    def scaled(self, s):
        return EnvMap(self._pixels * np.float32(s))


# -- directions --------------------------------------------------------------

def envmap_direction(u, v, width, height):
    """Unit direction through the center of texel (u, v)."""
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    phi = 2 * np.pi * (u + 0.5) / width - np.pi
    theta = np.pi * (v + 0.5) / height
    st = np.sin(theta)
    return np.stack([st * np.sin(phi), np.cos(theta), -st * np.cos(phi)], axis=-1)


def direction_to_pixel(d, width, height):
    """Integer texel (u, v) containing direction `d` (inverse of
    `envmap_direction`)."""
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    phi = np.arctan2(d[..., 0], -d[..., 2])
    theta = np.arccos(np.clip(d[..., 1], -1.0, 1.0))
    u = np.floor((phi + np.pi) / (2 * np.pi) * width).astype(np.int64) % width
    v = np.clip(np.floor(theta / np.pi * height).astype(np.int64), 0, height - 1)
    return u, v


def solid_angle_weights(height):
    """Per-row weight proportional to texel solid angle (sin(theta))."""
    return np.sin(np.pi * (np.arange(height) + 0.5) / height)


# -- rotation ----------------------------------------------------------------

def rotate_envmap(env, yaw_degrees):
    """Rotate about the vertical axis: content at longitude phi moves to
    phi + yaw. Integer-pixel shifts are exact permutations; fractional
    shifts blend the two neighbouring columns linearly."""
    w = env.width
    shift = (float(yaw_degrees) % 360.0) * w / 360.0
    k = round(shift)
    if abs(shift - k) < 1e-9:
        return EnvMap(np.roll(env.pixels, k % w, axis=1))
    k0 = math.floor(shift)
    frac = shift - k0
    px = env.pixels.astype(np.float64)
    out = (1.0 - frac) * np.roll(px, k0, axis=1) + frac * np.roll(px, k0 + 1, axis=1)
    return EnvMap(out)


def rotation_schedule(total_degrees, frames):
    """Per-frame yaw growing linearly from 0 to `total_degrees`."""
    if frames < 1:
        raise BadParameter("frames must be >= 1")
    if frames == 1:
        return [0.0]
    return [total_degrees * k / (frames - 1) for k in range(frames)]


# -- selection ---------------------------------------------------------------

@dataclass(frozen=True)
class EnvIndexEntry:
    env_id: str
    file: str
    tags: tuple = ()


def load_env_index(path):
    """Read ``env_index.json`` (``env_id -> {"file", "tags"}``); file paths are
    made relative to the index's directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "env_index.json"
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e}") from None
    return [EnvIndexEntry(eid, str(path.parent / e["file"]), tuple(e.get("tags", ())))
            for eid, e in sorted(raw.items())]


def select_envmap(lighting_tags, index):
    """Best tag overlap wins, ties go to the smallest env_id; no overlap at all
    returns `PROCEDURAL_FALLBACK`."""
    want = set(lighting_tags)
    best, best_score = None, 0
    for e in index:
        score = len(want & set(e.tags))
        if score > best_score or (score == best_score and score > 0 and e.env_id < best):
            best, best_score = e.env_id, score
    return best if best_score > 0 else PROCEDURAL_FALLBACK


# -- procedural sky ----------------------------------------------------------

COOL_SKY = np.array([0.6, 0.7, 1.0])
WARM_SKY = np.array([1.0, 0.7, 0.4])
SUN_SIGMA_DEG = 2.0


def sun_direction(azimuth_deg, elevation_deg):
    """World direction with longitude `azimuth_deg` (envmap convention)."""
    phi, el = math.radians(azimuth_deg), math.radians(elevation_deg)
    return np.array([math.cos(el) * math.sin(phi), math.sin(el), -math.cos(el) * math.cos(phi)])


def procedural_sky(sun_azimuth_deg=0.0, sun_elevation_deg=45.0, warmth=0.5, resolution=256):
    """Sky gradient (bright horizon, darker zenith, dim ground) plus a
    Gaussian sun (angular sigma 2 degrees, peak 500x the sky mean).

    The sun is integrated over each texel by supersampling, so it stays
    visible at coarse resolutions.
    """
    if not 0 <= sun_elevation_deg <= 90:
        raise BadParameter("sun elevation must lie in [0, 90]")
    if not 0 <= warmth <= 1:
        raise BadParameter("warmth must lie in [0, 1]")
    h = int(resolution)
    if h < 8:
        raise BadParameter("env map height must be >= 8")
    w = 2 * h
    chroma = (1 - warmth) * COOL_SKY + warmth * WARM_SKY

    theta = np.pi * (np.arange(h) + 0.5) / h
    up = theta <= np.pi / 2
    level = np.where(up, 0.4 + 0.6 * theta / (np.pi / 2), 0.3)
    sky = np.broadcast_to(level[:, None, None] * chroma, (h, w, 3))
    peak = 500.0 * float(sky.mean())

    sigma = math.radians(SUN_SIGMA_DEG)
    n = max(1, math.ceil((np.pi / h) / (sigma / 2)))
    sub = (np.arange(n) + 0.5) / n
    us = (np.arange(w)[:, None] + sub[None, :]).ravel()
    vs = (np.arange(h)[:, None] + sub[None, :]).ravel()
    dirs = envmap_direction(us[None, :] - 0.5, vs[:, None] - 0.5, w, h)
    cosang = np.clip(dirs @ sun_direction(sun_azimuth_deg, sun_elevation_deg), -1.0, 1.0)
    ang = np.arccos(cosang)
    g = np.exp(-0.5 * (ang / sigma) ** 2)
    # texel average weighted by the sub-sample solid angle
    wts = np.sin(np.pi * vs / h)[:, None] * np.ones(len(us))[None, :]
    g = (g * wts).reshape(h, n, w, n).sum(axis=(1, 3))
    g /= wts.reshape(h, n, w, n).sum(axis=(1, 3))
    sun = peak * g
    return EnvMap(sky + sun[:, :, None])


# -- file I/O ----------------------------------------------------------------

def save_lenv(env, path):
    h, w = env.height, env.width
    with open(path, "wb") as fh:
        fh.write(LENV_MAGIC + struct.pack("<III", LENV_VERSION, w, h))
        fh.write(env.pixels.astype("<f4").tobytes())


def _read_lenv(data, path):
    if len(data) < 16:
        raise TruncatedFile(f"{path}: header truncated")
    version, w, h = struct.unpack_from("<III", data, 4)
    if version != LENV_VERSION:
        raise FormatError(f"{path}: unsupported LENV version {version}")
    if w != 2 * h:
        raise DimensionMismatch(f"{path}: width {w} is not twice height {h}")
    need = 16 + 4 * 3 * w * h
    if len(data) < need:
        raise TruncatedFile(f"{path}: expected {need} bytes, got {len(data)}")
    px = np.frombuffer(data, dtype="<f4", count=3 * w * h, offset=16).reshape(h, w, 3)
    return EnvMap(px)


def float_to_rgbe(rgb):
    """Shared-exponent encode: exponent ceil(log2(max)) + 128, mantissas
    rounded to nearest (a mantissa that rounds to 256 bumps the exponent)."""
    rgb = np.asarray(rgb, dtype=np.float64).reshape(-1, 3)
    m = rgb.max(axis=1)
    out = np.zeros((len(rgb), 4), dtype=np.uint8)
    ok = m > 2.0 ** -128
    e = np.zeros(len(rgb), dtype=np.int64)
    e[ok] = np.ceil(np.log2(m[ok])).astype(np.int64)
    mant = np.zeros_like(rgb)
    mant[ok] = np.rint(rgb[ok] / np.ldexp(1.0, e[ok])[:, None] * 256.0)
    bump = ok & (mant.max(axis=1) >= 256)
    e[bump] += 1
    mant[bump] = np.rint(rgb[bump] / np.ldexp(1.0, e[bump])[:, None] * 256.0)
    ok &= e + 128 <= 255
    if np.any((m > 2.0 ** -128) & ~ok):
        raise BadParameter("radiance too large for RGBE")
    out[ok, :3] = mant[ok].astype(np.uint8)
    out[ok, 3] = (e[ok] + 128).astype(np.uint8)
    return out


def rgbe_to_float(rgbe):
    rgbe = np.asarray(rgbe, dtype=np.uint8).reshape(-1, 4)
    e = rgbe[:, 3].astype(np.int64)
    scale = np.where(e == 0, 0.0, np.ldexp(1.0, e - 128) / 256.0)
    return rgbe[:, :3].astype(np.float64) * scale[:, None]


def _rle_encode_channel(row):
    out = bytearray()
    i, n = 0, len(row)
    while i < n:
        # run length starting at i
        j = i + 1
        while j < n and j - i < 127 and row[j] == row[i]:
            j += 1
        if j - i >= 3:
            out += bytes((128 + j - i, row[i]))
            i = j
            continue
        # literal span until the next run of >= 3
        j = i
        while j < n and j - i < 128:
            if j + 2 < n and row[j] == row[j + 1] == row[j + 2]:
                break
            j += 1
        out += bytes((j - i,)) + bytes(row[i:j])
        i = j
    return out


def save_hdr(env, path):
    h, w = env.height, env.width
    rgbe = float_to_rgbe(env.pixels.reshape(-1, 3)).reshape(h, w, 4)
    with open(path, "wb") as fh:
        fh.write(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n")
        fh.write(f"-Y {h} +X {w}\n".encode())
        rle = 8 <= w < 0x8000
        for y in range(h):
            if rle:
                fh.write(bytes((2, 2, w >> 8, w & 0xFF)))
                for c in range(4):
                    fh.write(_rle_encode_channel(rgbe[y, :, c].tobytes()))
            else:
                fh.write(rgbe[y].tobytes())


def _read_hdr(data, path):
    pos = 0
    size = None
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise TruncatedFile(f"{path}: header truncated")
        line = data[pos:end].strip()
        pos = end + 1
        if line.startswith(b"FORMAT=") and line != b"FORMAT=32-bit_rle_rgbe":
            raise FormatError(f"{path}: unsupported {line.decode(errors='replace')}")
        if line.startswith(b"-Y "):
            parts = line.split()
            if len(parts) != 4 or parts[2] != b"+X":
                raise FormatError(f"{path}: unsupported orientation {line!r}")
            size = int(parts[1]), int(parts[3])
            break
    h, w = size
    if w != 2 * h:
        raise DimensionMismatch(f"{path}: width {w} is not twice height {h}")
    out = np.zeros((h, w, 4), dtype=np.uint8)
    for y in range(h):
        if pos + 4 > len(data):
            raise TruncatedFile(f"{path}: scanline {y} missing")
        head = data[pos:pos + 4]
        if 8 <= w < 0x8000 and head[0] == 2 and head[1] == 2 and not head[2] & 0x80:
            if (head[2] << 8 | head[3]) != w:
                raise FormatError(f"{path}: scanline {y} width mismatch")
            pos += 4
            for c in range(4):
                x = 0
                while x < w:
                    if pos >= len(data):
                        raise TruncatedFile(f"{path}: scanline {y} truncated")
                    count = data[pos]
                    pos += 1
                    if count > 128:
                        count -= 128
                        if pos >= len(data):
                            raise TruncatedFile(f"{path}: scanline {y} truncated")
                        if x + count > w:
                            raise FormatError(f"{path}: bad run in scanline {y}")
                        out[y, x:x + count, c] = data[pos]
                        pos += 1
                    else:
                        if count == 0 or x + count > w:
                            raise FormatError(f"{path}: bad literal in scanline {y}")
                        if pos + count > len(data):
                            raise TruncatedFile(f"{path}: scanline {y} truncated")
                        out[y, x:x + count, c] = np.frombuffer(data, np.uint8, count, pos)
                        pos += count
                    x += count
        else:
            n = 4 * w
            if pos + n > len(data):
                raise TruncatedFile(f"{path}: scanline {y} truncated")
            out[y] = np.frombuffer(data, np.uint8, n, pos).reshape(w, 4)
            pos += n
    return EnvMap(rgbe_to_float(out.reshape(-1, 4)).reshape(h, w, 3))


def load_envmap(path):
    """Read an LENV or Radiance RGBE file (detected from the magic bytes)."""
    data = Path(path).read_bytes()
    if data[:4] == LENV_MAGIC:
        return _read_lenv(data, path)
    if data[:2] == b"#?":
        return _read_hdr(data, path)
    if len(data) < 4:
        raise TruncatedFile(f"{path}: file too short")
    raise BadMagic(f"{path}: unrecognized magic {data[:4]!r}")


def save_envmap(env, path):
    """Write `env`; ``.hdr``/``.pic`` suffixes use RGBE, anything else LENV."""
    if Path(path).suffix.lower() in (".hdr", ".pic"):
        save_hdr(env, path)
    else:
        save_lenv(env, path)
