"""Controlled prompt grammar -> structured scene description.

Grammar (tokens are ``[a-z0-9_.-]+`` after ASCII case folding)::

    prompt   := "scene:" objects ["|" "lighting:" tag+] ["|" "camera:" move (name "=" number)*]
    objects  := object (";" object)* (";" relation)*
    object   := "a"? adjective* category ["material" token]
    relation := category relkind category

A relation's categories resolve to the first object clause with that
category. A three-word clause whose first word names an already declared
category (and that does not start with the article) is read as a relation,
so ``cup floats_above table`` reports the unknown relation instead of being
taken for an object with two adjectives.

All error positions are byte offsets into the UTF-8 encoded prompt.
"""

import re
from dataclasses import dataclass, field
from decimal import Decimal

from .errors import (
    DanglingReference,
    EmptyPrompt,
    PromptSyntaxError,
    UnknownMove,
    UnknownRelation,
)

RELATIONS = ("left_of", "right_of", "in_front_of", "behind", "on_top_of", "next_to")
MOVES = ("static", "orbit", "dolly", "crane", "dolly_zoom")

_WORD = re.compile(rb"[a-z0-9_.\-]+")
_NUMBER = re.compile(r"-?(?:\d+(?:\.\d*)?|\.\d+)\Z")
_PUNCT = {ord(":"): ":", ord(";"): ";", ord("|"): "|", ord("="): "="}
_SPACE = b" \t\r\n\f\v"

WORD, BAD, EOF = "word", "bad", "eof"
END = "<end>"


@dataclass(frozen=True)
class ObjectClause:
    category: str
    adjectives: tuple = ()
    material: str | None = None

    @property
    def tags(self):
        tags = [*self.adjectives, self.category]
        if self.material:
            tags.append(self.material)
        return tags


@dataclass(frozen=True)
class RelationClause:
    subject: int
    relation: str
    object: int


@dataclass(frozen=True)
class CameraClause:
    move: str = "static"
    parameters: tuple = ()

    @property
    def params(self):
        return dict(self.parameters)


@dataclass(frozen=True)
class PromptAst:
    objects: tuple
    relations: tuple = ()
    lighting_tags: tuple = ()
    camera: CameraClause = field(default_factory=CameraClause)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(data):
    """Split lower-cased prompt bytes into tokens; never raises."""
    toks = []
    i, n = 0, len(data)
    while i < n:
        c = data[i]
        if c in _SPACE:
            i += 1
        elif c in _PUNCT:
            toks.append(_Token(_PUNCT[c], _PUNCT[c], i))
            i += 1
        else:
            m = _WORD.match(data, i)
            if m:
                toks.append(_Token(WORD, m.group().decode("ascii"), i))
                i = m.end()
            else:
                # stop at the first unreadable byte, the parser reports it in context
                toks.append(_Token(BAD, data[i:i + 1].decode("latin-1"), i))
                return toks
    toks.append(_Token(EOF, "", n))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        if t.kind != EOF:
            self.i += 1
        return t

    def fail(self, expected, tok=None):
        tok = tok or self.tok
        found = None if tok.kind == EOF else tok.text
        raise PromptSyntaxError(tok.pos, expected, found)

    def expect(self, kind, text=None):
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            self.fail({text or kind})
        return self.advance()

    def parse(self):
        self.expect(WORD, "scene")
        self.expect(":")
        objects, relations = self.objects()
        lighting, camera = (), CameraClause()
        sections = ["lighting", "camera"]
        while self.tok.kind == "|":
            self.advance()
            t = self.tok
            if t.kind != WORD or t.text not in sections:
                self.fail(set(sections))
            self.advance()
            self.expect(":")
            sections = sections[sections.index(t.text) + 1:]
            if t.text == "lighting":
                lighting = self.lighting()
            else:
                camera = self.camera()
        if self.tok.kind != EOF:
            self.fail({"|", END} if sections else {END})
        return PromptAst(tuple(objects), tuple(relations), lighting, camera)

    def objects(self):
        objects, relations = [], []
        first_of = {}
        while True:
            words = []
            while self.tok.kind == WORD:
                words.append(self.advance())
            term = self.tok
            if term.kind not in (";", "|", EOF):
                self.fail({";", "|", END, "<word>"})
            if not words:
                self.fail({"<word>"})
            if self._is_relation(words, first_of, relations):
                relations.append(self._relation(words, term, first_of))
            elif relations:
                # objects may not follow relations
                self.fail(set(RELATIONS), words[1] if len(words) > 1 else term)
            else:
                obj = self._object(words, term)
                first_of.setdefault(obj.category, len(objects))
                objects.append(obj)
            if term.kind != ";":
                return objects, relations
            self.advance()

    @staticmethod
    def _is_relation(words, first_of, relations):
        if any(w.text == "material" for w in words):
            return False
        if relations:
            return True
        if len(words) != 3:
            return False
        return words[1].text in RELATIONS or (
            words[0].text != "a" and words[0].text in first_of
        )

    def _relation(self, words, term, first_of):
        if len(words) < 3:
            self.fail({"<category>"} if len(words) == 2 else set(RELATIONS), term)
        if len(words) > 3:
            self.fail({";", "|", END}, words[3])
        subj, rel, obj = words
        if subj.text not in first_of:
            raise DanglingReference(subj.text, subj.pos)
        if rel.text not in RELATIONS:
            raise UnknownRelation(rel.text, rel.pos)
        if obj.text not in first_of:
            raise DanglingReference(obj.text, obj.pos)
        i, j = first_of[subj.text], first_of[obj.text]
        if i == j:
            self.fail({"<other category>"}, obj)
        return RelationClause(i, rel.text, j)

    def _object(self, words, term):
        texts = [w.text for w in words]
        start = 1 if texts[0] == "a" else 0
        material = None
        if "material" in texts[start:]:
            m = texts.index("material", start)
            if m == start:
                self.fail({"<category>"}, words[m])
            if m + 1 == len(words):
                self.fail({"<material>"}, term)
            if m + 2 < len(words):
                self.fail({";", "|", END}, words[m + 2])
            material = texts[m + 1]
            texts = texts[:m]
        if len(texts) <= start:
            self.fail({"<category>"}, term)
        return ObjectClause(texts[-1], tuple(texts[start:-1]), material)

    def lighting(self):
        tags = []
        while self.tok.kind == WORD:
            tags.append(self.advance().text)
        if not tags:
            self.fail({"<tag>"})
        return tuple(tags)

    def camera(self):
        t = self.tok
        if t.kind != WORD:
            self.fail(set(MOVES))
        if t.text not in MOVES:
            raise UnknownMove(t.text, t.pos)
        self.advance()
        params = []
        while self.tok.kind == WORD:
            name = self.advance().text
            self.expect("=")
            num = self.tok
            if num.kind != WORD or not _NUMBER.match(num.text):
                self.fail({"<number>"})
            self.advance()
            params.append((name, float(num.text)))
        return CameraClause(t.text, tuple(params))


def parse_prompt(text):
    """Parse a prompt (str or UTF-8 bytes) into a `PromptAst`."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    if not data.strip(_SPACE):
        raise EmptyPrompt()
    return _Parser(_tokenize(data.lower())).parse()


def format_number(x):
    """Shortest decimal (never exponent) spelling that reads back to `x`."""
    x = float(x)
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"cannot spell {x} in the prompt grammar")
    if x == 0:
        return "0"
    text = format(Decimal(repr(x)), "f")
    return text[:-2] if text.endswith(".0") else text


def format_prompt(ast):
    """Pretty-print an AST in canonical form; `parse_prompt` inverts it."""
    clauses = []
    for obj in ast.objects:
        words = ["a", *obj.adjectives, obj.category]
        if obj.material is not None:
            words += ["material", obj.material]
        clauses.append(" ".join(words))
    first = {}
    for i, obj in enumerate(ast.objects):
        first.setdefault(obj.category, i)
    for rel in ast.relations:
        subj, obj = ast.objects[rel.subject].category, ast.objects[rel.object].category
        if first[subj] != rel.subject or first[obj] != rel.object:
            raise ValueError("relation endpoint is not the first clause of its category")
        clauses.append(f"{subj} {rel.relation} {obj}")
    out = "scene: " + "; ".join(clauses)
    if ast.lighting_tags:
        out += " | lighting: " + " ".join(ast.lighting_tags)
    cam = [ast.camera.move] + [f"{k}={format_number(v)}" for k, v in ast.camera.parameters]
    return out + " | camera: " + " ".join(cam)
