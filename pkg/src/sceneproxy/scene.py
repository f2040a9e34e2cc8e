"""Scene graph model, mesh-asset catalog and relational layout solver.

World frame: right-handed, y up, the default camera looks down -z (so
"in front of" means larger z). Only translations are optimized; node
orientations stay at the catalog default.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dsl import RELATIONS
from .errors import EmptyLibrary, FormatError, InputError
from .geometry import IDENTITY_QUAT, quat_to_matrix

LAYOUT_TOLERANCE = 1e-6
SIZE_TAGS = {"tiny": 0.25, "small": 0.5, "large": 1.5, "big": 1.5, "huge": 2.0}

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MeshAsset:
    asset_id: str
    vertices: np.ndarray
    triangles: np.ndarray
    tags: tuple = ()

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) == 0:
            raise FormatError(f"mesh {self.asset_id!r} has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise FormatError(f"mesh {self.asset_id!r} has out-of-range vertex indices")
        if not np.all(np.isfinite(self.vertices)):
            raise FormatError(f"mesh {self.asset_id!r} has non-finite vertices")
        self.tags = tuple(self.tags)

    def bounds(self):
        used = self.vertices[np.unique(self.triangles)]
        return used.min(axis=0), used.max(axis=0)


@dataclass
class SceneNode:
    id: str
    category: str
    tags: tuple = ()
    asset_id: str = ""
    rotation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        self.tags = tuple(self.tags)
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-9:
            raise InputError(f"node {self.id!r}: rotation quaternion is not unit norm")
        if not self.scale > 0:
            raise InputError(f"node {self.id!r}: scale must be positive")


@dataclass
class SceneGraph:
    nodes: list
    edges: list = field(default_factory=list)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate node ids")
        self.edges = [(int(i), int(j), r) for i, j, r in self.edges]
        for i, j, rel in self.edges:
            if not (0 <= i < len(self.nodes) and 0 <= j < len(self.nodes)) or i == j:
                raise InputError(f"bad edge endpoints ({i}, {j})")
            if rel not in RELATIONS:
                raise InputError(f"unknown relation {rel!r}")


@dataclass
class SceneAssembly:
    graph: SceneGraph
    meshes: list
    residual_energy: float = 0.0
    energy_trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.meshes) != len(self.graph.nodes):
            raise InputError("one mesh per node required")
        if not self.residual_energy >= 0:
            raise InputError("residual energy must be non-negative")

    def world_triangles(self):
        """All scene triangles in world space, shape (T, 3, 3)."""
        tris = []
        for node, mesh in zip(self.graph.nodes, self.meshes):
            R = quat_to_matrix(node.rotation)
            v = node.scale * mesh.vertices @ R.T + node.translation
            tris.append(v[mesh.triangles])
        return np.concatenate(tris, axis=0)

    def boxes(self):
        """World-space AABB (center, half extent) per node."""
        offs, halves = _local_boxes(self.graph, self.meshes)
        centers = np.array([n.translation for n in self.graph.nodes]) + offs
        return centers, halves

    def bounds(self):
        c, h = self.boxes()
        return (c - h).min(axis=0), (c + h).max(axis=0)


# -- catalog -----------------------------------------------------------------

def load_obj(path, asset_id=None, tags=()):
    """Read the v/f records of a Wavefront OBJ; polygons are fan-triangulated."""
    verts, tris = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for p in parts[1:]:
                    k = int(p.split("/")[0])
                    idx.append(k - 1 if k > 0 else len(verts) + k)
                if len(idx) < 3:
                    raise FormatError(f"{path}:{ln}: face with fewer than 3 vertices")
                tris.extend([idx[0], idx[a], idx[a + 1]] for a in range(1, len(idx) - 1))
    return MeshAsset(asset_id or Path(path).stem, np.array(verts), np.array(tris), tags)


def save_obj(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"# {mesh.asset_id}\n")
        for v in mesh.vertices:
            fh.write("v {!r} {!r} {!r}\n".format(*map(float, v)))
        for t in mesh.triangles:
            fh.write("f {} {} {}\n".format(*(int(i) + 1 for i in t)))


class AssetLibrary:
    """A directory of OBJ meshes described by ``index.json``
    (``asset_id -> {"file": ..., "tags": [...]}``)."""

    def __init__(self, root, entries):
        self.root = Path(root)
        self.entries = dict(entries)
        self._cache = {}

    @classmethod
    def load(cls, root):
        root = Path(root)
        try:
            index = json.loads((root / "index.json").read_text())
        except FileNotFoundError:
            raise InputError(f"no index.json in asset library {root}") from None
        except json.JSONDecodeError as e:
            raise FormatError(f"{root / 'index.json'}: {e}") from None
        entries = {aid: {"file": e["file"], "tags": list(e.get("tags", []))}
                   for aid, e in index.items()}
        return cls(root, entries)

    def __len__(self):
        return len(self.entries)

    def tag_index(self):
        return {aid: e["tags"] for aid, e in self.entries.items()}

    def mesh(self, asset_id):
        if asset_id not in self._cache:
            e = self.entries[asset_id]
            self._cache[asset_id] = load_obj(self.root / e["file"], asset_id, e["tags"])
        return self._cache[asset_id]


class Retrieval(NamedTuple):
    asset_id: str
    score: int

    @property
    def zero_score(self):
        return self.score == 0


def retrieve_asset(node_tags, library_index):
    """Pick the asset sharing the most tags with the node; ties go to the
    lexicographically smallest id. `library_index` maps id -> tags (an
    `AssetLibrary` is accepted too)."""
    if isinstance(library_index, AssetLibrary):
        library_index = library_index.tag_index()
    if not library_index:
        raise EmptyLibrary("asset library is empty")
    want = set(node_tags)
    best = min(library_index, key=lambda aid: (-len(want & set(library_index[aid])), aid))
    return Retrieval(best, len(want & set(library_index[best])))


def build_scene_graph(ast, library):
    """Instantiate one node per object clause, retrieve meshes and normalize
    their scale (largest extent 1 m, times any size tag)."""
    nodes, meshes = [], []
    counts = {}
    for obj in ast.objects:
        k = counts.get(obj.category, 0)
        counts[obj.category] = k + 1
        hit = retrieve_asset(obj.tags, library)
        mesh = library.mesh(hit.asset_id)
        lo, hi = mesh.bounds()
        extent = float(np.max(hi - lo)) or 1.0
        factor = 1.0
        for t in obj.tags:
            factor *= SIZE_TAGS.get(t, 1.0)
        nodes.append(SceneNode(f"{obj.category}_{k}", obj.category, obj.tags,
                               hit.asset_id, scale=factor / extent))
        meshes.append(mesh)
    edges = [(r.subject, r.object, r.relation) for r in ast.relations]
    return SceneGraph(nodes, edges), meshes


# -- layout energy -----------------------------------------------------------

_AXIS_RELATIONS = {"left_of": (0, 1.0), "right_of": (0, -1.0),
                   "in_front_of": (2, -1.0), "behind": (2, 1.0)}


def _local_boxes(graph, meshes):
    """AABB center offset (relative to the node translation) and half extent."""
    offs, halves = [], []
    for node, mesh in zip(graph.nodes, meshes):
        lo, hi = mesh.bounds()
        corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                            for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        pts = node.scale * corners @ quat_to_matrix(node.rotation).T
        a, b = pts.min(axis=0), pts.max(axis=0)
        offs.append((a + b) / 2)
        halves.append((b - a) / 2)
    return np.array(offs), np.array(halves)


def relation_penalty(rel, ci, hi, cj, hj):
    """Penalty for "node i <rel> node j" given AABB centers and half extents."""
    if rel in _AXIS_RELATIONS:
        a, sign = _AXIS_RELATIONS[rel]
        gap = sign * (cj[a] - ci[a]) - (hi[a] + hj[a])
        return max(0.0, -gap) ** 2
    if rel == "on_top_of":
        dy = (ci[1] - hi[1]) - (cj[1] + hj[1])
        d = math.hypot(ci[0] - cj[0], ci[2] - cj[2])
        return dy * dy + max(0.0, d - min(hj[0], hj[2])) ** 2
    if rel == "next_to":
        d = math.hypot(ci[0] - cj[0], ci[2] - cj[2])
        s = max(hi[0] + hj[0], hi[2] + hj[2])
        return max(0.0, 0.8 * s - d) ** 2 + max(0.0, d - 1.5 * s) ** 2
    raise ValueError(rel)


def overlap_penalty(ci, hi, cj, hj):
    """Squared AABB penetration depth (0 when the boxes are separated)."""
    depth = min(hi[0] + hj[0] - abs(ci[0] - cj[0]),
                hi[1] + hj[1] - abs(ci[1] - cj[1]),
                hi[2] + hj[2] - abs(ci[2] - cj[2]))
    return depth * depth if depth > 0 else 0.0


class _Energy:
    def __init__(self, graph, meshes):
        self.offs, self.halves = _local_boxes(graph, meshes)
        n = len(graph.nodes)
        self.edges = graph.edges
        related = {(min(i, j), max(i, j)) for i, j, _ in graph.edges}
        self.free_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
                           if (i, j) not in related]
        self.terms_of = [[] for _ in range(n)]
        for e in self.edges:
            self.terms_of[e[0]].append(("rel", e))
            self.terms_of[e[1]].append(("rel", e))
        for p in self.free_pairs:
            self.terms_of[p[0]].append(("ovl", p))
            self.terms_of[p[1]].append(("ovl", p))

    def _term(self, kind, t, C):
        h = self.halves
        if kind == "rel":
            i, j, rel = t
            return relation_penalty(rel, C[i], h[i], C[j], h[j])
        i, j = t
        return overlap_penalty(C[i], h[i], C[j], h[j])

    def total(self, T):
        C = (T + self.offs).tolist()
        return (sum(self._term("rel", e, C) for e in self.edges)
                + sum(self._term("ovl", p, C) for p in self.free_pairs))

    def node(self, T, i):
        C = (T + self.offs).tolist()
        return sum(self._term(k, t, C) for k, t in self.terms_of[i])


def layout_energy(graph, meshes, translations):
    """Total penalty energy for the given per-node translations."""
    return _Energy(graph, meshes).total(np.asarray(translations, dtype=float))


def _line_search(f, x0, radius, tol=1e-10):
    """Coarse scan of [x0-radius, x0+radius] followed by golden-section
    refinement around the best scan point."""
    xs = x0 + np.linspace(-radius, radius, 17)
    xs[8] = x0
    fs = np.array([f(x) for x in xs])
    # among equally good scan points prefer the one closest to the start
    ties = np.flatnonzero(fs == fs.min())
    k = int(ties[np.argmin(np.abs(ties - 8))])
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, 16)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(x0)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    fbest, xbest = fs[k], xs[k]
    for fv, xv in ((fc, c), (fd, d)):
        if fv < fbest:
            fbest, xbest = fv, xv
    return xbest, fbest


def solve_layout(graph, meshes, seed=0, restarts=8, max_sweeps=200, tol=1e-9):
    """Place nodes (translations only) to minimize the relational penalty
    energy by random-restart coordinate descent. Node 0 stays at the origin.

    Returns a new `SceneAssembly`; the input graph is not modified.
    """
    n = len(graph.nodes)
    energy = _Energy(graph, meshes)
    scale = float(2 * energy.halves.max(axis=1).sum()) + 1.0
    rng = np.random.default_rng(seed)

    best_T, best_E, best_trace = np.zeros((n, 3)), energy.total(np.zeros((n, 3))), []
    if n > 1:
        best_E = math.inf
        for r in range(restarts):
            T = np.zeros((n, 3))
            if r > 0:
                T[1:, 0] = rng.uniform(-scale, scale, n - 1)
                T[1:, 2] = rng.uniform(-scale, scale, n - 1)
            E = energy.total(T)
            trace = [E]
            for _ in range(max_sweeps):
                E_sweep = E
                for i in range(1, n):
                    for a in (0, 2, 1):
                        x0 = T[i, a]

                        def f(x, i=i, a=a):
                            T[i, a] = x
                            v = energy.node(T, i)
                            T[i, a] = x0
                            return v

                        x, fx = _line_search(f, x0, scale)
                        if not fx < f(x0):
                            continue
                        T[i, a] = x
                        E_new = energy.total(T)
                        if E_new <= E:
                            E = E_new
                            trace.append(E)
                        else:
                            T[i, a] = x0
                if E_sweep - E < tol:
                    break
            if E < best_E:
                best_T, best_E, best_trace = T.copy(), E, trace

    nodes = [SceneNode(nd.id, nd.category, nd.tags, nd.asset_id, nd.rotation.copy(),
                       best_T[k].copy(), nd.scale) for k, nd in enumerate(graph.nodes)]
    return SceneAssembly(SceneGraph(nodes, list(graph.edges)), list(meshes),
                         float(best_E), best_trace)


# -- serialization -----------------------------------------------------------

def scene_to_dict(assembly):
    return {
        "nodes": [{
            "id": n.id, "category": n.category, "tags": list(n.tags),
            "asset_id": n.asset_id,
            "quaternion": [float(x) for x in n.rotation],
            "translation": [float(x) for x in n.translation],
            "scale": float(n.scale),
        } for n in assembly.graph.nodes],
        "edges": [[i, j, r] for i, j, r in assembly.graph.edges],
        "residual_energy": float(assembly.residual_energy),
    }


def save_scene(assembly, path):
    Path(path).write_text(json.dumps(scene_to_dict(assembly), indent=2) + "\n")


def load_scene(path, library):
    """Read ``scene.json``; meshes are resolved through `library`."""
    try:
        d = json.loads(Path(path).read_text())
        nodes = [SceneNode(n["id"], n["category"], n.get("tags", ()), n["asset_id"],
                           n["quaternion"], n["translation"], n["scale"]) for n in d["nodes"]]
        edges = [tuple(e) for e in d["edges"]]
        residual = d["residual_energy"]
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: malformed scene file ({e})") from None
    meshes = [library.mesh(n.asset_id) for n in nodes]
    return SceneAssembly(SceneGraph(nodes, edges), meshes, residual)
