"""Procedural primitive meshes and a small demo asset / environment catalog.

The demo catalog stands in for a curated mesh library and an HDR map
collection so the pipeline runs without external downloads.
"""

import json
from pathlib import Path

import numpy as np

from .scene import MeshAsset, save_obj


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
    sx, sy, sz = np.asarray(size, dtype=float) / 2
    v = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])
    v += np.asarray(center, dtype=float)
    # corners indexed by bits (x, y, z); outward-facing triangles
    f = [(0, 1, 3), (0, 3, 2), (4, 6, 7), (4, 7, 5), (0, 4, 5), (0, 5, 1),
         (2, 3, 7), (2, 7, 6), (0, 2, 6), (0, 6, 4), (1, 5, 7), (1, 7, 3)]
    return v, np.array(f)


def lathe(profile, segments=24):
    """Surface of revolution about +y from (radius, height) profile points."""
    profile = np.asarray(profile, dtype=float)
    ang = 2 * np.pi * np.arange(segments) / segments
    verts = [[r * np.sin(a), h, r * np.cos(a)] for r, h in profile for a in ang]
    tris = []
    for i in range(len(profile) - 1):
        for k in range(segments):
            a, b = i * segments + k, i * segments + (k + 1) % segments
            c, d = a + segments, b + segments
            tris += [(a, b, d), (a, d, c)]
    # caps
    verts = np.array(verts)
    base = len(verts)
    verts = np.vstack([verts, [0, profile[0, 1], 0], [0, profile[-1, 1], 0]])
    top0 = (len(profile) - 1) * segments
    for k in range(segments):
        k2 = (k + 1) % segments
        if profile[0, 0] > 0:
            tris.append((base, k2, k))
        if profile[-1, 0] > 0:
            tris.append((base + 1, top0 + k, top0 + k2))
    return verts, np.array(tris)


def sphere(radius=0.5, rings=12, segments=24):
    t = np.linspace(0, np.pi, rings + 1)[1:-1]
    prof = [(0.0, -radius)] + [(radius * np.sin(a), -radius * np.cos(a)) for a in t] + [(0.0, radius)]
    v, f = lathe(prof, segments)
    return v, f


def merge(*parts):
    verts, tris, off = [], [], 0
    for v, f in parts:
        verts.append(v)
        tris.append(f + off)
        off += len(v)
    return np.vstack(verts), np.vstack(tris)


def _table():
    top = box((1.6, 0.08, 0.9), (0, 0.74, 0))
    legs = [box((0.08, 0.7, 0.08), (x, 0.35, z)) for x in (-0.7, 0.7) for z in (-0.35, 0.35)]
    return merge(top, *legs)


def _chair():
    seat = box((0.5, 0.06, 0.5), (0, 0.45, 0))
    back = box((0.5, 0.5, 0.06), (0, 0.73, -0.22))
    legs = [box((0.05, 0.42, 0.05), (x, 0.21, z)) for x in (-0.2, 0.2) for z in (-0.2, 0.2)]
    return merge(seat, back, *legs)


DEMO_ASSETS = {
    "ball_01": (lambda: sphere(0.5), ["ball", "sphere", "rubber", "round"]),
    "book_01": (lambda: box((0.3, 0.05, 0.22)), ["book", "paper", "flat"]),
    "chair_01": (_chair, ["chair", "wooden", "seat"]),
    "crate_01": (lambda: box(), ["crate", "box", "cube", "wooden"]),
    "cup_01": (lambda: lathe([(0.04, 0), (0.05, 0.02), (0.055, 0.1)], 16), ["cup", "ceramic", "mug"]),
    "lamp_01": (lambda: merge(lathe([(0.15, 0), (0.02, 0.05), (0.02, 0.5)], 12),
                              lathe([(0.2, 0.45), (0.1, 0.7)], 16)), ["lamp", "metal", "light"]),
    "table_01": (_table, ["table", "wooden", "desk"]),
    "vase_01": (lambda: lathe([(0.1, 0), (0.18, 0.15), (0.08, 0.4), (0.1, 0.5)], 20),
                ["vase", "ceramic", "round"]),
}

DEMO_ENVS = {
    # env_id: (tags, procedural_sky kwargs)
    "noon_01": (["noon", "bright", "clear", "day", "midday"],
                dict(sun_azimuth_deg=30.0, sun_elevation_deg=65.0, warmth=0.2)),
    "overcast_01": (["overcast", "cloudy", "soft", "diffuse"],
                    dict(sun_azimuth_deg=-60.0, sun_elevation_deg=80.0, warmth=0.4)),
    "sunset_01": (["sunset", "warm", "evening", "golden"],
                  dict(sun_azimuth_deg=120.0, sun_elevation_deg=6.0, warmth=1.0)),
    "morning_01": (["morning", "cool", "dawn"],
                   dict(sun_azimuth_deg=-100.0, sun_elevation_deg=15.0, warmth=0.6)),
}


def demo_mesh(asset_id):
    make, tags = DEMO_ASSETS[asset_id]
    v, f = make()
    return MeshAsset(asset_id, v, f, tags)


def write_demo_library(root):
    """Write the demo OBJ catalog (``index.json`` + meshes) to `root`."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    index = {}
    for aid in sorted(DEMO_ASSETS):
        save_obj(demo_mesh(aid), root / f"{aid}.obj")
        index[aid] = {"file": f"{aid}.obj", "tags": DEMO_ASSETS[aid][1]}
    (root / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    return root


def write_demo_env_index(root, height=32):
    """Write procedural demo HDR maps (LENV) and ``env_index.json`` to `root`."""
    from .envlight import procedural_sky, save_envmap

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    index = {}
    for eid in sorted(DEMO_ENVS):
        tags, kw = DEMO_ENVS[eid]
        save_envmap(procedural_sky(resolution=height, **kw), root / f"{eid}.lenv")
        index[eid] = {"file": f"{eid}.lenv", "tags": tags}
    (root / "env_index.json").write_text(json.dumps(index, indent=2) + "\n")
    return root
