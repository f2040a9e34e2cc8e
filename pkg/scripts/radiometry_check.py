"""Energy checks for the proxy passes: microfacet distribution normalization
and white-furnace renders of a large quad under a unit environment."""
import argparse
import math

import numpy as np

from sceneproxy.camera import CameraPose, default_intrinsics
from sceneproxy.envlight import EnvMap
from sceneproxy.geometry import look_at
from sceneproxy.render import PASSES, RenderSettings, ggx_ndf, render_pass
from sceneproxy.scene import MeshAsset, SceneAssembly, SceneGraph, SceneNode


def ndf_integral(alpha, n):
    """Trapezoid rule for 2 pi * integral of D(c) c dc over c = cos(theta) in
    [0, 1], on a grid that is geometric in 1 - c to resolve the peak."""
    one_minus_c = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, n)])
    c = 1.0 - one_minus_c
    f = np.array([ggx_ndf(ci, alpha) * ci for ci in c])
    return float(2 * math.pi * np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(one_minus_c)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--spp", type=int, default=64)
    ap.add_argument("--size", type=int, default=32)
    args = ap.parse_args()
    for alpha in (0.05, 0.34, 1.0):
        print(f"NDF integral, roughness {alpha}: {ndf_integral(alpha, args.samples):.5f}")

    quad = MeshAsset("quad", [[-20, -20, 0], [20, -20, 0], [20, 20, 0], [-20, 20, 0]],
                     [[0, 1, 2], [0, 2, 3]])
    scene = SceneAssembly(SceneGraph([SceneNode("q", "q")]), [quad])
    eye = np.array([0.0, 0.0, 3.0])
    pose = CameraPose(look_at(eye, np.zeros(3)), eye, default_intrinsics(args.size, args.size))
    env = EnvMap(np.ones((16, 32, 3), np.float32))
    settings = RenderSettings(args.size, args.size, args.spp, args.spp)
    for kind in PASSES:
        img = render_pass(scene, env, pose, kind, settings)[..., 0]
        print(f"furnace {kind}: mean {img.mean():.4f}  min {img.min():.4f}  max {img.max():.4f}")


if __name__ == "__main__":
    main()
