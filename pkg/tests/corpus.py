"""Generated prompt corpora: well-formed ASTs for round-trip checks and
malformed prompts with the error each one must raise."""

import numpy as np

from sceneproxy.dsl import (
    MOVES,
    RELATIONS,
    CameraClause,
    ObjectClause,
    PromptAst,
    RelationClause,
)
from sceneproxy.errors import (
    DanglingReference,
    EmptyPrompt,
    PromptSyntaxError,
    UnknownMove,
    UnknownRelation,
)

CATEGORIES = ("table", "chair", "vase", "cup", "lamp", "book", "sofa", "crate", "ball", "plant")
ADJECTIVES = ("red", "wooden", "small", "large", "shiny", "old", "tall", "blue", "round", "x-1")
MATERIALS = ("oak", "steel", "glass", "ceramic", "marble", "v2.0")
LIGHT_TAGS = ("warm", "sunset", "noon", "overcast", "cool", "dramatic", "soft", "golden")
PARAM_NAMES = ("span", "radius", "elevation", "start", "end", "height0", "azimuth")


def random_ast(rng):
    n = int(rng.integers(1, 6))
    cats = [CATEGORIES[i] for i in rng.integers(len(CATEGORIES), size=n)]
    objects = []
    for c in cats:
        adj = tuple(ADJECTIVES[i] for i in rng.integers(len(ADJECTIVES), size=int(rng.integers(0, 3))))
        mat = MATERIALS[int(rng.integers(len(MATERIALS)))] if rng.random() < 0.4 else None
        objects.append(ObjectClause(c, adj, mat))
    first = {}
    for i, c in enumerate(cats):
        first.setdefault(c, i)
    heads = sorted(first.values())
    rels = []
    if len(heads) > 1:
        for _ in range(int(rng.integers(0, 4))):
            i, j = rng.choice(heads, size=2, replace=False)
            rels.append(RelationClause(int(i), RELATIONS[int(rng.integers(len(RELATIONS)))], int(j)))
    tags = tuple(LIGHT_TAGS[i] for i in rng.integers(len(LIGHT_TAGS), size=int(rng.integers(1, 4))))
    params = []
    for _ in range(int(rng.integers(0, 4))):
        kind = rng.integers(3)
        v = float(rng.integers(-400, 400)) if kind == 0 else (
            float(np.round(rng.normal() * 50, 3)) if kind == 1 else float(rng.random()))
        params.append((PARAM_NAMES[int(rng.integers(len(PARAM_NAMES)))], v))
    cam = CameraClause(MOVES[int(rng.integers(len(MOVES)))], tuple(params))
    return PromptAst(tuple(objects), tuple(rels), tags, cam)


def valid_corpus(n=200, seed=0):
    rng = np.random.default_rng(seed)
    return [random_ast(rng) for _ in range(n)]


# (prompt, error type, marker): the error position is the byte offset of the
# first occurrence of `marker`, `marker` itself when it is an int, or the
# prompt length when it is None
MALFORMED = [
    ("", EmptyPrompt, None),
    ("   \n\t", EmptyPrompt, 0),
    ("scene: a cup; cup floats_above table", UnknownRelation, "floats_above"),
    ("SCENE: A CUP; CUP FLOATS_ABOVE TABLE", UnknownRelation, "FLOATS_ABOVE"),
    ("scene: a cup; a table; cup on_top_of chair", DanglingReference, "chair"),
    ("scene: a cup; chair next_to cup", DanglingReference, "chair"),
    ("scene: a cup | camera: spin", UnknownMove, "spin"),
    ("scene a cup", PromptSyntaxError, "a cup"),
    ("cup", PromptSyntaxError, "cup"),
    ("scene: a cup | lighting:", PromptSyntaxError, None),
    ("scene: a cup | lighting: | camera: orbit", PromptSyntaxError, "| camera"),
    ("scene: a cup | camera: orbit span=abc", PromptSyntaxError, "abc"),
    ("scene: a cup | camera: orbit span=", PromptSyntaxError, None),
    ("scene: a cup | camera: orbit span 3", PromptSyntaxError, "3"),
    ("scene: a cup | camera: orbit | lighting: warm", PromptSyntaxError, "lighting"),
    ("scene: a cup | weather: sunny", PromptSyntaxError, "weather"),
    ("scene: a cup; cup left_of cup", PromptSyntaxError, len("scene: a cup; cup left_of ")),
    ("scene: a cup; ; a table", PromptSyntaxError, "; a table"),
    ("scene: a cup # note", PromptSyntaxError, "#"),
    ("scene: a cup material", PromptSyntaxError, None),
    ("scene: a material oak", PromptSyntaxError, "material"),
    ("scene: éclair", PromptSyntaxError, "é"),
    ("scene: a cup; a table; cup behind table; a lamp", PromptSyntaxError, None),
    ("scene: a cup; a table; cup behind table; table left_of cup extra", PromptSyntaxError, "extra"),
    ("scene: a cup | lighting: warm | lighting: cold", PromptSyntaxError, "lighting: cold"),
]


def expected_offset(prompt, marker):
    data = prompt.encode("utf-8")
    if marker is None:
        return len(data)
    if isinstance(marker, int):
        return marker
    return data.index(marker.encode("utf-8"))
