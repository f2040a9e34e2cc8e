"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 bad input, 4 runtime failure.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as M
from .assets import write_demo_env_index, write_demo_library
from .camera import interpolate_keyframes, load_trajectory, plan_camera, save_trajectory
from .config import load_config
from .dsl import parse_prompt
from .envlight import (
    PROCEDURAL_FALLBACK,
    load_env_index,
    load_envmap,
    procedural_sky,
    rotate_envmap,
    rotation_schedule,
    save_envmap,
    select_envmap,
)
from .errors import InputError
from .latent import (
    StageConfig,
    init_adapter,
    init_denoiser,
    make_toy_dataset,
    run_stage,
    save_checkpoint,
    save_loss_trace,
)
from .pipeline import (
    RunManifest,
    make_syn,
    run_pipeline,
    sha256_file,
    staged_output,
    write_manifest,
)
from .render import render_proxy, save_previews, save_proxy
from .scene import AssetLibrary, build_scene_graph, load_scene, save_scene, solve_layout

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3, 4


def _threads(args):
    env = os.environ.get("LIVER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"LIVER_THREADS must be an integer, got {env!r}") from None
    return args.threads


def _read_prompt(path):

    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise InputError(f"{path}: prompt is not valid UTF-8 ({e})") from None
    return text, parse_prompt(text)


def _configs(args):
    run, train = load_config(args.config)
    over = {k: getattr(args, k) for k in ("frames", "width", "height", "spp_diffuse", "spp_glossy")
            if getattr(args, k, None) is not None}
    if over:
        run = replace(run, **over)
    return run, train


def _finish(out, inputs, settings, seed):
    return write_manifest(out, RunManifest(inputs, {"seed": seed}, settings))


def _hash_inputs(**paths):
    out = {}
    for k, p in paths.items():
        if p is None:
            continue
        p = Path(p)
        if p.is_dir():
            p = next((p / n for n in ("index.json", "env_index.json") if (p / n).exists()), None)
            if p is None:
                continue
        out[k] = sha256_file(p)
    return out


# -- commands ----------------------------------------------------------------------

def cmd_init_demo(args):
    with staged_output(args.out) as tmp:
        write_demo_library(tmp / "library")
        write_demo_env_index(tmp / "envs", height=args.env_height)
        (tmp / "smoke_prompt.txt").write_text(
            "scene: a wooden table; a ceramic vase; vase on_top_of table"
            " | lighting: warm sunset | camera: orbit span=30 radius=2\n")
        _finish(tmp, {}, {"env_height": args.env_height}, args.seed)
    print(f"demo library, env index and smoke prompt written to {args.out}")


def cmd_build_scene(args):
    run, _ = _configs(args)
    _, ast = _read_prompt(args.prompt)
    library = AssetLibrary.load(args.library)
    with staged_output(args.out) as tmp:
        graph, meshes = build_scene_graph(ast, library)
        assembly = solve_layout(graph, meshes, seed=args.seed, restarts=run.layout_restarts)
        save_scene(assembly, tmp / "scene.json")
        _finish(tmp, _hash_inputs(prompt=args.prompt, library=args.library),
                {"layout_restarts": run.layout_restarts}, args.seed)
    print(f"residual energy {assembly.residual_energy:.6g}")


def cmd_plan_camera(args):
    run, _ = _configs(args)
    with staged_output(args.out) as tmp:
        if args.keys:
            keys = load_trajectory(args.keys).poses
            n = len(keys)
            if n < 2:
                raise InputError("keyframe file needs at least 2 poses")
            traj = interpolate_keyframes([(k / (n - 1), p) for k, p in enumerate(keys)],
                                         run.frames)
        else:
            if not (args.prompt and args.scene and args.library):
                raise InputError("plan-camera needs --prompt, --scene and --library (or --keys)")
            _, ast = _read_prompt(args.prompt)
            assembly = load_scene(args.scene, AssetLibrary.load(args.library))
            traj = plan_camera(ast.camera, assembly, run.frames, run.width, run.height)
        save_trajectory(traj, tmp / "traj.txt")
        _finish(tmp, _hash_inputs(prompt=args.prompt, scene=args.scene, keys=args.keys),
                {"frames": run.frames, "width": run.width, "height": run.height}, args.seed)


def cmd_env(args):
    with staged_output(args.out) as tmp:
        if args.action == "rotate":
            env = rotate_envmap(load_envmap(args.env), args.yaw)
            save_envmap(env, tmp / args.name)
            settings = {"yaw": args.yaw}
            inputs = _hash_inputs(env=args.env)
        elif args.action == "sky":
            env = procedural_sky(args.azimuth, args.elevation, args.warmth, args.resolution)
            save_envmap(env, tmp / args.name)
            settings = {k: getattr(args, k) for k in ("azimuth", "elevation", "warmth", "resolution")}
            inputs = {}
        else:
            index = load_env_index(args.index)
            env_id = select_envmap(args.tags, index)
            (tmp / "selection.json").write_text(json.dumps(
                {"env_id": env_id, "procedural": env_id == PROCEDURAL_FALLBACK,
                 "tags": list(args.tags)}, indent=2) + "\n")
            settings = {"tags": list(args.tags)}
            inputs = _hash_inputs(index=args.index)
            print(env_id)
        _finish(tmp, inputs, settings, args.seed)


def cmd_render_proxy(args):
    run, _ = _configs(args)
    assembly = load_scene(args.scene, AssetLibrary.load(args.library))
    traj = load_trajectory(args.traj)
    env = load_envmap(args.env)
    if args.schedule:
        schedule = json.loads(Path(args.schedule).read_text())["yaw_degrees"]
    else:
        schedule = rotation_schedule(args.rotation_total, traj.frame_count)
    w, h = (int(round(2 * traj[0].intrinsics[2])), int(round(2 * traj[0].intrinsics[3])))
    run = replace(run, width=w, height=h)
    with staged_output(args.out) as tmp:
        stack = render_proxy(assembly, env, traj, schedule, run.render_settings(args.seed),
                             threads=_threads(args))
        save_proxy(stack, tmp / "proxy")
        if run.previews:
            save_previews(stack, tmp / "preview")
        _finish(tmp, _hash_inputs(scene=args.scene, traj=args.traj, env=args.env),
                asdict(run.render_settings(args.seed)), args.seed)
    print(f"rendered {stack.frames} frames of {w}x{h}x9")


def cmd_make_syn(args):
    run, _ = _configs(args)
    make_syn(args.library, args.env_index, args.out, args.count, run, args.seed,
             _threads(args), progress=lambda s: print(f"{s.sample_id}: {s.object_count} objects, "
                                                      f"env {s.env_id}, yaw {s.rotation_total_deg:.2f}"))


def cmd_train_toy(args):
    _, train = _configs(args)
    for k in ("steps_a", "steps_b", "steps_c", "samples"):
        if getattr(args, k) is not None:
            train = replace(train, **{k: getattr(args, k)})
    syn = make_toy_dataset(train.samples, train.size, args.seed, "syn", train.render_spp)
    real = make_toy_dataset(train.samples, train.size, args.seed, "real", train.render_spp) \
        if train.steps_c else None
    state, den = init_adapter(args.seed), init_denoiser(args.seed)
    losses, last = [], "A"
    for name, steps in (("A", train.steps_a), ("B", train.steps_b), ("C", train.steps_c)):
        if not steps:
            continue
        cfg = StageConfig(name, steps, train.batch_size, train.lr, seed=args.seed)
        res = run_stage(cfg, state, den, syn, real)
        state, den, last = res.state, res.denoiser, name
        losses += res.losses
        print(f"stage {name}: loss {res.losses[0]:.4f} -> {np.mean(res.losses[-10:]):.4f}")
    with staged_output(args.out) as tmp:
        save_checkpoint(tmp / "checkpoint.lckp", state, den, last)
        save_loss_trace(tmp / "loss.csv", losses)
        _finish(tmp, {}, asdict(train), args.seed)


def cmd_eval(args):
    summary, per_frame = {}, []
    if args.kind == "traj":
        m = M.evaluate_trajectory(load_trajectory(args.pred), load_trajectory(args.gt), args.step)
        summary.update(ate=m.ate, rpe_t=m.rpe_t, rpe_r=m.rpe_r)
    elif args.kind == "light":
        vals = M.si_mse_sequence(M.load_env_sequence(args.pred), M.load_env_sequence(args.gt),
                                 args.mode)
        summary.update(lighting_error=float(np.mean(vals)),
                       lighting_instability=M.lighting_instability(vals) if len(vals) > 1 else 0.0)
        per_frame = [{"frame": i, "si_mse": v} for i, v in enumerate(vals)]
    else:
        summary["miou"] = M.compute_miou(M.load_mask_sequence(args.pred),
                                         M.load_mask_sequence(args.gt))
    with staged_output(args.out) as tmp:
        M.write_report(tmp, summary, per_frame)
        _finish(tmp, _hash_inputs(**({"pred": args.pred, "gt": args.gt}
                                     if args.kind == "traj" else {})), {"kind": args.kind},
                args.seed)
    print(json.dumps({k: v for k, v in summary.items() if v is not None}, sort_keys=True))


def cmd_run(args):
    run, _ = _configs(args)
    if args.rotation_total is not None:
        run = replace(run, rotation_total=args.rotation_total)
    if args.procedural:
        run = replace(run, force_procedural=True)
    m = run_pipeline(args.prompt, args.library, args.env_index, args.out, run, args.seed,
                     _threads(args))
    print(f"{len(m.outputs)} files written to {args.out}")


# -- parser ------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out", default="out")
    common.add_argument("--config", default=None, help="TOML or JSON config file")

    size = argparse.ArgumentParser(add_help=False)
    size.add_argument("--frames", type=int)
    size.add_argument("--width", type=int)
    size.add_argument("--height", type=int)
    size.add_argument("--spp-diffuse", dest="spp_diffuse", type=int)
    size.add_argument("--spp-glossy", dest="spp_glossy", type=int)

    p = argparse.ArgumentParser(prog="sceneproxy", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init-demo", parents=[common], help="write the demo catalog and skies")
    s.add_argument("--env-height", type=int, default=32)
    s.set_defaults(func=cmd_init_demo)

    s = sub.add_parser("build-scene", parents=[common], help="prompt -> scene.json")
    s.add_argument("--prompt", required=True)
    s.add_argument("--library", required=True)
    s.set_defaults(func=cmd_build_scene)

    s = sub.add_parser("plan-camera", parents=[common, size], help="-> traj.txt")
    s.add_argument("--prompt")
    s.add_argument("--scene")
    s.add_argument("--library")
    s.add_argument("--keys", help="keyframe poses in trajectory format, spread evenly in time")
    s.set_defaults(func=cmd_plan_camera)

    s = sub.add_parser("env", parents=[common], help="environment map tools")
    env = s.add_subparsers(dest="action", required=True)
    e = env.add_parser("rotate", parents=[common])
    e.add_argument("--env", required=True)
    e.add_argument("--yaw", type=float, required=True)
    e.add_argument("--name", default="env.lenv")
    e = env.add_parser("sky", parents=[common])
    e.add_argument("--azimuth", type=float, default=0.0)
    e.add_argument("--elevation", type=float, default=45.0)
    e.add_argument("--warmth", type=float, default=0.5)
    e.add_argument("--resolution", type=int, default=64)
    e.add_argument("--name", default="sky.lenv")
    e = env.add_parser("select", parents=[common])
    e.add_argument("--index", required=True)
    e.add_argument("--tags", nargs="+", required=True)
    s.set_defaults(func=cmd_env)

    s = sub.add_parser("render-proxy", parents=[common, size], help="-> proxy/*.lpxy")
    s.add_argument("--scene", required=True)
    s.add_argument("--library", required=True)
    s.add_argument("--traj", required=True)
    s.add_argument("--env", required=True)
    s.add_argument("--schedule", help="rotation.json with yaw_degrees per frame")
    s.add_argument("--rotation-total", dest="rotation_total", type=float, default=0.0)
    s.set_defaults(func=cmd_render_proxy)

    s = sub.add_parser("make-syn", parents=[common, size], help="synthetic dataset samples")
    s.add_argument("--library", required=True)
    s.add_argument("--env-index", dest="env_index", required=True)
    s.add_argument("--count", type=int, default=1)
    s.set_defaults(func=cmd_make_syn)

    s = sub.add_parser("train-toy", parents=[common], help="staged adapter training")
    s.add_argument("--steps-a", dest="steps_a", type=int)
    s.add_argument("--steps-b", dest="steps_b", type=int)
    s.add_argument("--steps-c", dest="steps_c", type=int)
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("eval", parents=[common], help="control metrics")
    ev = s.add_subparsers(dest="kind", required=True)
    e = ev.add_parser("traj", parents=[common])
    e.add_argument("--step", type=int, default=1)
    e2 = ev.add_parser("light", parents=[common])
    e2.add_argument("--mode", choices=("per_frame", "per_sequence"), default="per_frame")
    e3 = ev.add_parser("layout", parents=[common])
    for e_ in (e, e2, e3):
        e_.add_argument("--pred", required=True)
        e_.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("run", parents=[common, size], help="prompt -> full proxy sample")
    s.add_argument("--prompt", required=True)
    s.add_argument("--library", required=True)
    s.add_argument("--env-index", dest="env_index")
    s.add_argument("--rotation-total", dest="rotation_total", type=float)
    s.add_argument("--procedural", action="store_true", help="always use the procedural sky")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as e:
        _report(e)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime error
        _report(e)
        return EXIT_RUNTIME
    return EXIT_OK


def _report(e):
    where = getattr(e, "stage", None)
    prefix = f"error [{where}]" if where else "error"
    print(f"{prefix}: {type(e).__name__}: {e}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
