"""Train the toy conditioning model through stages A and B (optionally C)
and write the loss curve as CSV plus a PNG plot."""
import argparse
import time
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from sceneproxy.latent import (
    StageConfig,
    evaluate_loss,
    init_adapter,
    init_denoiser,
    make_toy_dataset,
    run_stage,
    save_loss_trace,
)


def plot(losses, path, size=(640, 320)):
    w, h = size
    y = np.log10(np.maximum(np.asarray(losses), 1e-12))
    lo, hi = y.min(), y.max()
    xs = np.linspace(10, w - 10, len(y))
    ys = h - 10 - (y - lo) / ((hi - lo) or 1.0) * (h - 20)
    im = Image.new("RGB", size, "white")
    ImageDraw.Draw(im).line(list(zip(xs, ys)), fill=(30, 60, 200), width=1)
    im.save(path)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("train_curve"))
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--steps-a", type=int, default=250)
    ap.add_argument("--steps-b", type=int, default=250)
    ap.add_argument("--steps-c", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    start = time.perf_counter()
    syn = make_toy_dataset(args.samples, 32, seed=args.seed)
    real = make_toy_dataset(args.samples, 32, seed=args.seed, source="real") if args.steps_c else None
    state, den = init_adapter(args.seed), init_denoiser(args.seed)
    first = evaluate_loss(state, den, syn)
    losses = []
    for stage, steps in (("A", args.steps_a), ("B", args.steps_b), ("C", args.steps_c)):
        if steps:
            res = run_stage(StageConfig(stage, steps, seed=args.seed), state, den, syn, real)
            state, den = res.state, res.denoiser
            losses += res.losses
            print(f"stage {stage}: fixed-draw loss {evaluate_loss(state, den, syn):.4f}")
    last = evaluate_loss(state, den, syn)
    args.out.mkdir(parents=True, exist_ok=True)
    save_loss_trace(args.out / "loss.csv", losses)
    plot(losses, args.out / "loss.png")
    print(f"loss {first:.4f} -> {last:.4f} ({100 * (1 - last / first):.1f}% lower) "
          f"in {time.perf_counter() - start:.1f}s; curve in {args.out}")


if __name__ == "__main__":
    main()
