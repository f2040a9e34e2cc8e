import os

# numba reads these at import time; 8 workers lets the thread-count tests run on any host
os.environ.setdefault("NUMBA_NUM_THREADS", "8")
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from hypothesis import HealthCheck, settings  # noqa: E402

from sceneproxy.assets import write_demo_env_index, write_demo_library  # noqa: E402
from sceneproxy.dsl import parse_prompt  # noqa: E402
from sceneproxy.envlight import load_env_index  # noqa: E402
from sceneproxy.scene import AssetLibrary, build_scene_graph, solve_layout  # noqa: E402

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SMOKE_PROMPT = ("scene: a wooden table; a ceramic vase; vase on_top_of table"
                " | lighting: warm sunset | camera: orbit span=30 radius=2")


@pytest.fixture(scope="session")
def demo_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    write_demo_library(root / "library")
    write_demo_env_index(root / "envs", height=16)
    (root / "smoke_prompt.txt").write_text(SMOKE_PROMPT + "\n")
    return root


@pytest.fixture(scope="session")
def library(demo_root):
    return AssetLibrary.load(demo_root / "library")


@pytest.fixture(scope="session")
def env_index(demo_root):
    return load_env_index(demo_root / "envs")


@pytest.fixture(scope="session")
def smoke_scene(library):
    graph, meshes = build_scene_graph(parse_prompt(SMOKE_PROMPT), library)
    return solve_layout(graph, meshes, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, detail = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
