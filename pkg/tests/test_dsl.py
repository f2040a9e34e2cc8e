import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpus import ADJECTIVES, CATEGORIES, LIGHT_TAGS, MALFORMED, MATERIALS, PARAM_NAMES, expected_offset
from sceneproxy.dsl import (
    MOVES,
    RELATIONS,
    CameraClause,
    ObjectClause,
    PromptAst,
    RelationClause,
    format_number,
    format_prompt,
    parse_prompt,
)
from sceneproxy.errors import InputError, PromptError, PromptSyntaxError


def test_reference_prompt():
    ast = parse_prompt("scene: a red vase; a wooden table; vase on_top_of table"
                       " | lighting: warm sunset | camera: orbit span=30 radius=2")
    assert [o.category for o in ast.objects] == ["vase", "table"]
    assert ast.objects[0].adjectives == ("red",)
    assert ast.relations == (RelationClause(0, "on_top_of", 1),)
    assert ast.lighting_tags == ("warm", "sunset")
    assert ast.camera.move == "orbit"
    assert ast.camera.params == {"span": 30.0, "radius": 2.0}


def test_material_and_optional_article():
    ast = parse_prompt("scene: shiny cup material steel; a lamp")
    assert ast.objects[0] == ObjectClause("cup", ("shiny",), "steel")
    assert ast.objects[1] == ObjectClause("lamp")
    assert ast.objects[0].tags == ["shiny", "cup", "steel"]


def test_sections_are_optional():
    ast = parse_prompt("scene: a cup")
    assert ast.lighting_tags == ()
    assert ast.camera == CameraClause()


def test_whitespace_and_case_insensitive():
    a = parse_prompt("scene: a red vase; a table; vase left_of table | camera: dolly")
    b = parse_prompt("  SCENE :A   Red VASE ;a table;\nvase LEFT_OF table|camera:DOLLY ")
    assert a == b


def test_relation_resolves_to_first_clause():
    ast = parse_prompt("scene: a cup; a table; a cup; cup on_top_of table")
    assert ast.relations == (RelationClause(0, "on_top_of", 1),)


def test_unknown_adjectives_are_kept():
    ast = parse_prompt("scene: a glorbish cup")
    assert ast.objects[0].adjectives == ("glorbish",)


def test_bytes_input():
    assert parse_prompt(b"scene: a cup") == parse_prompt("scene: a cup")


@pytest.mark.parametrize("prompt,error,marker", MALFORMED)
def test_malformed_corpus(prompt, error, marker):
    with pytest.raises(error) as info:
        parse_prompt(prompt)
    assert isinstance(info.value, InputError)
    assert info.value.position == (0 if marker == 0 or not prompt.strip() else expected_offset(prompt, marker))


def test_syntax_error_lists_expected_tokens():
    with pytest.raises(PromptSyntaxError) as info:
        parse_prompt("scene a cup")
    assert ":" in info.value.expected


def test_error_message_mentions_offset():
    with pytest.raises(PromptError, match="byte 18"):
        parse_prompt("scene: a cup; cup floats_above table")


@pytest.mark.parametrize("x,text", [(30.0, "30"), (0.0, "0"), (-2.5, "-2.5"), (1e-7, "0.0000001"),
                                    (1e20, "100000000000000000000"), (0.1, "0.1")])
def test_format_number(x, text):
    assert format_number(x) == text
    assert float(text) == x


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_format_number_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        format_number(bad)


def test_printer_rejects_relations_to_repeated_category():
    ast = PromptAst((ObjectClause("cup"), ObjectClause("cup"), ObjectClause("table")),
                    (RelationClause(1, "left_of", 2),))
    with pytest.raises(ValueError):
        format_prompt(ast)


words = st.sampled_from(ADJECTIVES)


@st.composite
def asts(draw):
    cats = draw(st.lists(st.sampled_from(CATEGORIES), min_size=1, max_size=5))
    objects = tuple(ObjectClause(c, tuple(draw(st.lists(words, max_size=3))),
                                 draw(st.none() | st.sampled_from(MATERIALS))) for c in cats)
    first = {}
    for i, c in enumerate(cats):
        first.setdefault(c, i)
    heads = sorted(first.values())
    rels = ()
    if len(heads) > 1:
        pairs = st.tuples(st.sampled_from(heads), st.sampled_from(RELATIONS),
                          st.sampled_from(heads)).filter(lambda r: r[0] != r[2])
        rels = tuple(RelationClause(*r) for r in draw(st.lists(pairs, max_size=4)))
    tags = tuple(draw(st.lists(st.sampled_from(LIGHT_TAGS), max_size=3)))
    numbers = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)
    params = tuple(draw(st.lists(st.tuples(st.sampled_from(PARAM_NAMES), numbers), max_size=4)))
    return PromptAst(objects, rels, tags, CameraClause(draw(st.sampled_from(MOVES)), params))


@given(asts())
def test_print_parse_roundtrip(ast):
    assert parse_prompt(format_prompt(ast)) == ast


@given(asts())
def test_invariants_hold(ast):
    parsed = parse_prompt(format_prompt(ast))
    for r in parsed.relations:
        assert r.subject != r.object
        assert 0 <= r.subject < len(parsed.objects) and 0 <= r.object < len(parsed.objects)
        assert r.relation in RELATIONS
    assert parsed.camera.move in MOVES


@given(st.binary(max_size=60))
def test_arbitrary_bytes_never_crash(data):
    try:
        ast = parse_prompt(data)
    except InputError as e:
        assert 0 <= e.position <= len(data)
    else:
        assert ast == parse_prompt(data)
