"""Render the demo prompt end to end and report timing and pass statistics."""
import argparse
import tempfile
import time
from pathlib import Path

from sceneproxy.assets import write_demo_env_index, write_demo_library
from sceneproxy.config import RunConfig
from sceneproxy.pipeline import run_pipeline
from sceneproxy.render import PASSES, load_proxy

PROMPT = ("scene: a wooden table; a ceramic vase; vase on_top_of table"
          " | lighting: warm sunset | camera: orbit span=30 radius=2")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=None, help="output directory (default: temp)")
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--frames", type=int, default=4)
    ap.add_argument("--spp", type=int, default=32)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as scratch:
        root = Path(scratch)
        write_demo_library(root / "library")
        write_demo_env_index(root / "envs")
        (root / "prompt.txt").write_text(PROMPT + "\n")
        out = args.out or root / "out"
        cfg = RunConfig(frames=args.frames, width=args.size, height=args.size,
                        spp_diffuse=args.spp, spp_glossy=args.spp)
        for label in ("cold (includes JIT compile)", "warm"):
            start = time.perf_counter()
            manifest = run_pipeline(root / "prompt.txt", root / "library", root / "envs", out, cfg,
                                    threads=args.threads)
            print(f"{label}: {time.perf_counter() - start:.2f}s")
        stack = load_proxy(out / "proxy")
        print(f"stack {stack.shape}, env {manifest.settings['env_id']}")
        for i, name in enumerate(PASSES):
            block = stack.data[:, 3 * i:3 * i + 3]
            print(f"  {name}: mean {block.mean():.4f}  max {block.max():.4f}")
        print(f"outputs in {out}" if args.out else "outputs discarded (pass --out to keep)")


if __name__ == "__main__":
    main()
