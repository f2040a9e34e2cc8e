import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sceneproxy.assets import box, demo_mesh
from sceneproxy.dsl import RELATIONS, parse_prompt
from sceneproxy.errors import EmptyLibrary, FormatError, InputError
from sceneproxy.scene import (
    LAYOUT_TOLERANCE,
    MeshAsset,
    SceneGraph,
    SceneNode,
    build_scene_graph,
    layout_energy,
    load_obj,
    load_scene,
    retrieve_asset,
    save_obj,
    save_scene,
    solve_layout,
)


def cube(name="cube"):
    v, f = box()
    return MeshAsset(name, v, f)


def world_aabb(assembly, k):
    """AABB straight from the transformed vertices of node k."""
    node, mesh = assembly.graph.nodes[k], assembly.meshes[k]
    pts = node.scale * mesh.vertices + node.translation
    return pts.min(axis=0), pts.max(axis=0)


def two_cubes(*edges):
    nodes = [SceneNode("a", "a"), SceneNode("b", "b")]
    return SceneGraph(nodes, list(edges)), [cube("a"), cube("b")]


def test_retrieval_unique_max():
    lib = {"vase_01": ["vase", "ceramic"], "chair_01": ["chair"]}
    hit = retrieve_asset(["vase", "red"], lib)
    assert hit.asset_id == "vase_01" and not hit.zero_score


def test_retrieval_zero_overlap_tie_break():
    hit = retrieve_asset(["dragon"], {"b_02": ["x"], "a_01": ["y"], "c": []})
    assert hit.asset_id == "a_01" and hit.zero_score


def test_retrieval_empty_library():
    with pytest.raises(EmptyLibrary):
        retrieve_asset(["x"], {})


def test_retrieval_accepts_library(library):
    assert retrieve_asset(["table"], library).asset_id == "table_01"


def test_single_node_at_origin():
    asm = solve_layout(SceneGraph([SceneNode("a", "a")]), [cube()], seed=3)
    assert np.array_equal(asm.graph.nodes[0].translation, np.zeros(3))
    assert asm.residual_energy == 0


def test_on_top_of_unit_cubes():
    asm = solve_layout(*two_cubes((0, 1, "on_top_of")), seed=0)
    lo_a, hi_a = world_aabb(asm, 0)
    lo_b, hi_b = world_aabb(asm, 1)
    assert abs(lo_a[1] - hi_b[1]) < 1e-3
    ox = max(0.0, min(hi_a[0], hi_b[0]) - max(lo_a[0], lo_b[0]))
    oz = max(0.0, min(hi_a[2], hi_b[2]) - max(lo_a[2], lo_b[2]))
    area = (hi_a[0] - lo_a[0]) * (hi_a[2] - lo_a[2])
    assert ox * oz / area > 0.5
    # energy recomputed from the vertex AABBs
    ca, ha = (lo_a + hi_a) / 2, (hi_a - lo_a) / 2
    cb, hb = (lo_b + hi_b) / 2, (hi_b - lo_b) / 2
    dy = (ca[1] - ha[1]) - (cb[1] + hb[1])
    d = np.hypot(*(ca - cb)[[0, 2]])
    oracle = dy ** 2 + max(0.0, d - min(hb[0], hb[2])) ** 2
    assert abs(asm.residual_energy - oracle) < 1e-12


def test_contradictory_relations_leave_residual():
    asm = solve_layout(*two_cubes((0, 1, "left_of"), (1, 0, "left_of")), seed=0)
    assert asm.residual_energy > LAYOUT_TOLERANCE


@pytest.mark.parametrize("rel,axis,sign", [("left_of", 0, -1), ("right_of", 0, 1),
                                           ("in_front_of", 2, 1), ("behind", 2, -1)])
def test_axis_relations_are_satisfied(rel, axis, sign):
    asm = solve_layout(*two_cubes((0, 1, rel)), seed=1)
    assert asm.residual_energy < LAYOUT_TOLERANCE
    lo_a, hi_a = world_aabb(asm, 0)
    lo_b, hi_b = world_aabb(asm, 1)
    if sign < 0:
        assert hi_a[axis] <= lo_b[axis] + 1e-3
    else:
        assert lo_a[axis] >= hi_b[axis] - 1e-3


def test_next_to_distance_band():
    asm = solve_layout(*two_cubes((0, 1, "next_to")), seed=2)
    assert asm.residual_energy < LAYOUT_TOLERANCE
    d = np.hypot(*(asm.graph.nodes[0].translation - asm.graph.nodes[1].translation)[[0, 2]])
    assert 0.8 - 1e-3 <= d <= 1.5 + 1e-3


def test_unrelated_objects_do_not_overlap():
    nodes = [SceneNode(c, c) for c in "abc"]
    asm = solve_layout(SceneGraph(nodes), [cube(c) for c in "abc"], seed=0)
    assert asm.residual_energy < LAYOUT_TOLERANCE


def test_input_graph_untouched():
    graph, meshes = two_cubes((0, 1, "left_of"))
    solve_layout(graph, meshes, seed=0)
    assert all(np.array_equal(n.translation, np.zeros(3)) for n in graph.nodes)


def test_energy_trace_non_increasing(smoke_scene):
    tr = np.array(smoke_scene.energy_trace)
    assert len(tr) >= 1 and np.all(np.diff(tr) <= 0)
    assert tr[-1] == smoke_scene.residual_energy


def test_seed_determinism(library):
    ast = parse_prompt("scene: a table; a vase; a cup; a lamp; vase on_top_of table;"
                       " cup left_of vase; lamp behind table")
    a = solve_layout(*build_scene_graph(ast, library), seed=11)
    b = solve_layout(*build_scene_graph(ast, library), seed=11)
    assert a.residual_energy == b.residual_energy
    for x, y in zip(a.graph.nodes, b.graph.nodes):
        assert np.array_equal(x.translation, y.translation)


def test_smoke_scene_satisfied(smoke_scene):
    assert smoke_scene.residual_energy < LAYOUT_TOLERANCE


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from(RELATIONS), st.integers(0, 3)),
                max_size=5),
       st.tuples(*[st.floats(-50, 50)] * 3))
def test_translation_equivariance(edges, offset):
    edges = [(i, j, r) for i, r, j in edges if i != j]
    nodes = [SceneNode(f"n{k}", "n") for k in range(4)]
    meshes = [demo_mesh(a) for a in ("crate_01", "vase_01", "table_01", "ball_01")]
    for k, n in enumerate(nodes):
        n.scale = 1.0 / float(np.max(np.subtract(*meshes[k].bounds()[::-1])))
    asm = solve_layout(SceneGraph(nodes, edges), meshes, seed=0, restarts=1, max_sweeps=5)
    T = np.array([n.translation for n in asm.graph.nodes]) + np.array(offset)
    shifted = layout_energy(asm.graph, asm.meshes, T)
    assert shifted == pytest.approx(asm.residual_energy, rel=1e-9, abs=1e-9)


def test_size_tags_and_normalization(library):
    graph, _ = build_scene_graph(parse_prompt("scene: a vase; a tiny vase; a huge vase"), library)
    s = [n.scale for n in graph.nodes]
    assert s[1] == pytest.approx(0.25 * s[0]) and s[2] == pytest.approx(2.0 * s[0])
    lo, hi = library.mesh("vase_01").bounds()
    assert s[0] * np.max(hi - lo) == pytest.approx(1.0)
    assert [n.id for n in graph.nodes] == ["vase_0", "vase_1", "vase_2"]


def test_obj_roundtrip(tmp_path):
    m = demo_mesh("lamp_01")
    save_obj(m, tmp_path / "m.obj")
    back = load_obj(tmp_path / "m.obj", tags=m.tags)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)


def test_obj_quads_and_negative_indices(tmp_path):
    (tmp_path / "q.obj").write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n")
    m = load_obj(tmp_path / "q.obj")
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_obj_bad_index(tmp_path):
    (tmp_path / "b.obj").write_text("v 0 0 0\nf 1 2 3\n")
    with pytest.raises(FormatError):
        load_obj(tmp_path / "b.obj")


def test_scene_json_roundtrip(tmp_path, smoke_scene, library):
    save_scene(smoke_scene, tmp_path / "scene.json")
    back = load_scene(tmp_path / "scene.json", library)
    assert back.residual_energy == smoke_scene.residual_energy
    assert back.graph.edges == smoke_scene.graph.edges
    for x, y in zip(back.graph.nodes, smoke_scene.graph.nodes):
        assert x.id == y.id and np.array_equal(x.translation, y.translation)
        assert np.array_equal(x.rotation, y.rotation) and x.scale == y.scale


def test_graph_validation():
    with pytest.raises(InputError):
        SceneGraph([SceneNode("a", "a"), SceneNode("a", "a")])
    with pytest.raises(InputError):
        SceneGraph([SceneNode("a", "a")], [(0, 0, "left_of")])
    with pytest.raises(InputError):
        SceneNode("a", "a", rotation=(2, 0, 0, 0))
