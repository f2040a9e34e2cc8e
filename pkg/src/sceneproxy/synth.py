"""Procedural synthetic samples: random objects, a random environment and a
random yaw sweep of the lighting over the clip."""

import re
from dataclasses import dataclass

import numpy as np

from .dsl import CameraClause, ObjectClause, PromptAst, RelationClause, format_prompt
from .errors import EmptyEnvIndex, EmptyLibrary
from .scene import SceneGraph, SceneNode, solve_layout

ROTATION_RANGE = (180.0, 240.0)
OBJECT_COUNT_RANGE = (2, 6)
SYN_RELATIONS = ("left_of", "right_of", "in_front_of", "behind", "next_to")
_RESERVED = {"a", "material", "scene", "lighting", "camera"}


@dataclass(frozen=True)
class SynSampleSpec:
    seed: int
    object_count: int
    asset_ids: tuple
    env_id: str
    rotation_total_deg: float
    frames: int
    resolution: tuple          # (H, W)
    camera: CameraClause
    relations: tuple = ()      # (subject, relation, object) node indices

    @property
    def sample_id(self):
        return f"syn_{self.seed:06d}"


def sample_syn_spec(asset_ids, env_ids, seed, frames=17, resolution=(128, 128)):
    """Draw a sample description; a pure function of `seed` and the pools."""
    asset_ids = sorted(asset_ids)
    env_ids = sorted(env_ids)
    if len(asset_ids) < 2:
        raise EmptyLibrary(f"need at least 2 assets, library has {len(asset_ids)}")
    if not env_ids:
        raise EmptyEnvIndex("environment index is empty")
    rng = np.random.default_rng([seed, 0x5E])
    lo, hi = OBJECT_COUNT_RANGE
    count = int(rng.integers(lo, hi + 1))
    if count <= len(asset_ids):
        picks = list(rng.choice(len(asset_ids), size=count, replace=False))
    else:
        picks = list(rng.permutation(len(asset_ids)))
        picks += list(rng.integers(len(asset_ids), size=count - len(asset_ids)))
    env_id = env_ids[int(rng.integers(len(env_ids)))]
    rotation = float(rng.uniform(*ROTATION_RANGE))
    camera = CameraClause("orbit", (
        ("span", round(float(rng.uniform(30.0, 120.0)), 3)),
        ("elevation", round(float(rng.uniform(10.0, 35.0)), 3)),
        ("start", round(float(rng.uniform(0.0, 360.0)), 3)),
    ))
    relations = []
    for k in range(1, count):
        j = int(rng.integers(k))
        relations.append((k, SYN_RELATIONS[int(rng.integers(len(SYN_RELATIONS)))], j))
    return SynSampleSpec(int(seed), count, tuple(asset_ids[i] for i in picks), env_id,
                         rotation, int(frames), tuple(resolution), camera, tuple(relations))


def _category(asset_id, tags):
    for word in [*tags, asset_id.split("_")[0], asset_id]:
        word = str(word).lower()
        if re.fullmatch(r"[a-z0-9_.-]+", word) and word not in _RESERVED:
            return word
    return "object"


def spec_prompt(spec, library, env_tags=()):
    """Template caption: the prompt-language description of the sample.
    Relations touching repeated categories are left out of the caption."""
    cats = [_category(a, library.entries[a]["tags"]) for a in spec.asset_ids]
    first = {}
    for i, c in enumerate(cats):
        first.setdefault(c, i)
    rels = tuple(RelationClause(i, r, j) for i, r, j in spec.relations
                 if first[cats[i]] == i and first[cats[j]] == j)
    tags = tuple(t for t in (str(x).lower() for x in env_tags)
                 if re.fullmatch(r"[a-z0-9_.-]+", t) and t not in _RESERVED)
    ast = PromptAst(tuple(ObjectClause(c) for c in cats), rels,
                    tags or (_category(spec.env_id, ()),), spec.camera)
    return ast, format_prompt(ast)


def assemble_spec(spec, library, restarts=4):
    """Scene graph with the sampled meshes, laid out by `solve_layout`."""
    nodes, meshes, counts = [], [], {}
    for aid in spec.asset_ids:
        mesh = library.mesh(aid)
        cat = _category(aid, library.entries[aid]["tags"])
        k = counts.get(cat, 0)
        counts[cat] = k + 1
        lo, hi = mesh.bounds()
        nodes.append(SceneNode(f"{cat}_{k}", cat, tuple(library.entries[aid]["tags"]), aid,
                               scale=1.0 / (float(np.max(hi - lo)) or 1.0)))
        meshes.append(mesh)
    graph = SceneGraph(nodes, [(i, j, r) for i, r, j in spec.relations])
    return solve_layout(graph, meshes, seed=spec.seed, restarts=restarts)


def sample_synthetic_scene(library, env_index, seed, frames=17, resolution=(128, 128),
                           restarts=4):
    """(SynSampleSpec, SceneAssembly) for one seed."""
    spec = sample_syn_spec(library.entries, [e.env_id for e in env_index], seed, frames,
                           resolution)
    return spec, assemble_spec(spec, library, restarts)
