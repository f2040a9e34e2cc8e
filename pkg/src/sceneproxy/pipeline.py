"""End-to-end orchestration: prompt -> scene -> camera -> lighting -> proxy,
plus the synthetic dataset writer. Outputs are staged and only moved into
place when every step succeeded."""

import hashlib
import json
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .camera import plan_camera, save_trajectory
from .config import RunConfig
from .dsl import parse_prompt
from .envlight import (
    PROCEDURAL_FALLBACK,
    load_env_index,
    load_envmap,
    procedural_sky,
    rotation_schedule,
    save_envmap,
    select_envmap,
)
from .errors import InputError
from .render import render_proxy, save_previews, save_proxy
from .scene import AssetLibrary, build_scene_graph, save_scene, solve_layout
from .synth import sample_synthetic_scene, spec_prompt

MANIFEST = "manifest.json"


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    inputs: dict
    seeds: dict
    settings: dict
    outputs: list = field(default_factory=list)   # [{"path", "sha256", "bytes"}]
    tool: str = "sceneproxy"
    version: str = __version__

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path):
        return cls(**json.loads(Path(path).read_text()))

    def verify(self, root):
        """Paths whose content no longer matches the recorded hash."""
        root = Path(root)
        return [o["path"] for o in self.outputs
                if not (root / o["path"]).is_file() or sha256_file(root / o["path"]) != o["sha256"]]


@contextmanager
def stage(label):
    """Tag any error raised inside with the pipeline stage it came from."""
    try:
        yield
    except Exception as e:
        if not hasattr(e, "stage"):
            e.stage = label
        raise


@contextmanager
def staged_output(out_dir):
    """Yield a scratch directory inside `out_dir`; its contents are moved into
    `out_dir` on success and deleted on failure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    for item in sorted(tmp.iterdir()):
        dest = out / item.name
        if dest.is_dir():
            shutil.rmtree(dest)
        elif dest.exists():
            dest.unlink()
        item.rename(dest)
    tmp.rmdir()


def list_outputs(root, exclude=(MANIFEST,)):
    root = Path(root)
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.name not in exclude
                   and not any(part.startswith(".staging-") for part in p.relative_to(root).parts))
    return [{"path": p.relative_to(root).as_posix(), "sha256": sha256_file(p),
             "bytes": p.stat().st_size} for p in files]


def write_manifest(root, manifest):
    manifest.outputs = list_outputs(root)
    (Path(root) / MANIFEST).write_text(manifest.to_json())
    return manifest


def write_sample(directory, assembly, trajectory, env, schedule, stack, caption, previews=True):
    """Dataset sample layout: scene.json, traj.txt, env.lenv, rotation.json,
    proxy/frame_%05d.lpxy, preview/*.png, caption.txt."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_scene(assembly, d / "scene.json")
    save_trajectory(trajectory, d / "traj.txt")
    save_envmap(env, d / "env.lenv")
    (d / "rotation.json").write_text(json.dumps({"yaw_degrees": [float(x) for x in schedule]},
                                                indent=2) + "\n")
    save_proxy(stack, d / "proxy")
    if previews:
        save_previews(stack, d / "preview")
    (d / "caption.txt").write_text(caption.rstrip("\n") + "\n")


def resolve_env(tags, env_index_path, config):
    """(env_id, EnvMap) chosen by tag overlap, or the procedural sky."""
    index = load_env_index(env_index_path) if env_index_path is not None else []
    env_id = PROCEDURAL_FALLBACK if config.force_procedural else select_envmap(tags, index)
    if env_id == PROCEDURAL_FALLBACK:
        warm = 1.0 if {"warm", "sunset", "golden", "evening"} & set(tags) else 0.3
        return env_id, procedural_sky(45.0, 35.0, warm, config.env_resolution)
    entry = next(e for e in index if e.env_id == env_id)
    return env_id, load_envmap(entry.file)


def run_pipeline(prompt_path, library_root, env_index_path, out_dir, config=RunConfig(),
                 seed=0, threads=None):
    """Prompt file to a complete sample directory plus manifest."""
    prompt_path = Path(prompt_path)
    inputs = {"prompt": sha256_file(prompt_path),
              "library": sha256_file(Path(library_root) / "index.json")}
    if env_index_path is not None:
        p = Path(env_index_path)
        inputs["env_index"] = sha256_file(p / "env_index.json" if p.is_dir() else p)
    with staged_output(out_dir) as tmp:
        with stage("parse"):
            try:
                text = prompt_path.read_bytes().decode("utf-8")
            except UnicodeDecodeError as e:
                raise InputError(f"{prompt_path}: prompt is not valid UTF-8 ({e})") from None
            ast = parse_prompt(text)
        with stage("scene"):
            library = AssetLibrary.load(library_root)
            graph, meshes = build_scene_graph(ast, library)
            assembly = solve_layout(graph, meshes, seed=seed, restarts=config.layout_restarts)
        with stage("lighting"):
            env_id, env = resolve_env(ast.lighting_tags, env_index_path, config)
        with stage("camera"):
            traj = plan_camera(ast.camera, assembly, config.frames, config.width, config.height)
        with stage("render"):
            schedule = rotation_schedule(config.rotation_total, config.frames)
            stack = render_proxy(assembly, env, traj, schedule, config.render_settings(seed),
                                 threads=threads)
        with stage("write"):
            write_sample(tmp, assembly, traj, env, schedule, stack, text, config.previews)
            manifest = write_manifest(tmp, RunManifest(
                inputs, {"seed": seed}, {**asdict(config), "env_id": env_id}))
    return manifest


def make_syn(library_root, env_index_path, out_dir, count, config=RunConfig(), seed=0,
             threads=None, progress=None):
    """Write `count` synthetic samples (seeds seed .. seed+count-1)."""
    library = AssetLibrary.load(library_root)
    index = load_env_index(env_index_path)
    env_tags = {e.env_id: e.tags for e in index}
    inputs = {"library": sha256_file(Path(library_root) / "index.json")}
    p = Path(env_index_path)
    inputs["env_index"] = sha256_file(p / "env_index.json" if p.is_dir() else p)
    with staged_output(out_dir) as tmp:
        for s in range(seed, seed + count):
            with stage("sample"):
                spec, assembly = sample_synthetic_scene(
                    library, index, s, config.frames, (config.height, config.width),
                    config.layout_restarts)
            with stage("camera"):
                traj = plan_camera(spec.camera, assembly, spec.frames, config.width, config.height)
            with stage("render"):
                env = load_envmap(next(e.file for e in index if e.env_id == spec.env_id))
                schedule = rotation_schedule(spec.rotation_total_deg, spec.frames)
                stack = render_proxy(assembly, env, traj, schedule, config.render_settings(s),
                                     threads=threads)
            with stage("write"):
                _, caption = spec_prompt(spec, library, env_tags[spec.env_id])
                write_sample(tmp / spec.sample_id, assembly, traj, env, schedule, stack, caption,
                             config.previews)
            if progress is not None:
                progress(spec)
        manifest = write_manifest(tmp, RunManifest(
            inputs, {"seed": seed, "count": count}, asdict(config)))
    return manifest
