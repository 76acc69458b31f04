"""Flat sketch-extrude modeling language.

A program is a sequence of single-assignment statements followed by a
``result(id)`` line naming the solid the program denotes::

    w0=workspace(XY,0,0,0)
    s0=sketch(w0,circle(0,0,0.4))
    b0=extrude(s0,0.5)
    result(b0)

Statement kinds: ``workspace(PLANE,x,y,z)`` places a sketch plane,
``sketch(ws, profile...)`` draws one or more closed profiles on it
(combined by the even-odd rule), ``extrude(sk, height)`` sweeps the sketch
region along the plane normal, and ``union|cut|intersect(a,b)`` combine
solids. Identifiers match ``[a-z][a-z0-9_]*``; each is defined exactly once
and before first use, so reference graphs are acyclic by construction.

Whitespace is insignificant outside tokens. The canonical printed form has
one statement per line, no spaces, dead statements removed, and statements
ordered by a deterministic dependency walk; ``parse(print_program(p))``
structurally equals ``canonicalize(p)``.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

from .errors import ProgramSemanticError, ProgramSyntaxError

PLANES = ("XY", "YZ", "ZX")
BOOLEAN_OPS = ("union", "cut", "intersect")

KEYWORDS = frozenset(
    {"workspace", "sketch", "extrude", "union", "cut", "intersect",
     "result", "circle", "rect", "polygon"}
)

_ID_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class Rect:
    cx: float
    cy: float
    w: float
    h: float


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]


Profile = Circle | Rect | Polygon


@dataclass(frozen=True)
class WorkspaceDef:
    plane: str
    origin: tuple[float, float, float]


@dataclass(frozen=True)
class SketchDef:
    workspace_id: str
    profiles: tuple[Profile, ...]


@dataclass(frozen=True)
class ExtrudeDef:
    sketch_id: str
    height: float


@dataclass(frozen=True)
class BooleanDef:
    op: str
    left_id: str
    right_id: str


Body = WorkspaceDef | SketchDef | ExtrudeDef | BooleanDef


@dataclass(frozen=True)
class Statement:
    id: str
    body: Body


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...]
    result_id: str


def statement_kind(body: Body) -> str:
    if isinstance(body, WorkspaceDef):
        return "workspace"
    if isinstance(body, SketchDef):
        return "sketch"
    return "solid"


def references(body: Body) -> tuple[str, ...]:
    """Identifiers the statement body reads, in positional order."""
    if isinstance(body, SketchDef):
        return (body.workspace_id,)
    if isinstance(body, ExtrudeDef):
        return (body.sketch_id,)
    if isinstance(body, BooleanDef):
        return (body.left_id, body.right_id)
    return ()


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<NUM>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
    | (?P<WORD>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<PUNCT>[=(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # NUM | WORD | PUNCT | EOF
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    line = 1
    line_start = 0
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch in " \t\r":
            pos += 1
            continue
        if ch == "\n":
            pos += 1
            line += 1
            line_start = pos
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ProgramSyntaxError(
                f"unexpected character {ch!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("EOF", "", line, n - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, expected: str, tok: _Tok):
        found = tok.text if tok.kind != "EOF" else "end of input"
        raise ProgramSyntaxError(
            f"expected {expected}, found {found!r}", tok.line, tok.col
        )

    def expect_punct(self, ch: str):
        tok = self.next()
        if tok.kind != "PUNCT" or tok.text != ch:
            self.fail(f"'{ch}'", tok)

    def expect_word(self, what="a name") -> _Tok:
        tok = self.next()
        if tok.kind != "WORD":
            self.fail(what, tok)
        return tok

    def expect_id(self) -> str:
        tok = self.expect_word("an identifier")
        if tok.text in KEYWORDS:
            self.fail("an identifier (keyword is reserved)", tok)
        if not _ID_RE.match(tok.text):
            self.fail("an identifier ([a-z][a-z0-9_]*)", tok)
        return tok.text

    def expect_num(self) -> float:
        tok = self.next()
        if tok.kind != "NUM":
            self.fail("a number", tok)
        return float(tok.text)

    def parse_profile(self) -> Profile:
        head = self.expect_word("a profile (circle, rect, or polygon)")
        if head.text == "circle":
            self.expect_punct("(")
            cx = self.expect_num()
            self.expect_punct(",")
            cy = self.expect_num()
            self.expect_punct(",")
            r = self.expect_num()
            self.expect_punct(")")
            return Circle(cx, cy, r)
        if head.text == "rect":
            self.expect_punct("(")
            cx = self.expect_num()
            self.expect_punct(",")
            cy = self.expect_num()
            self.expect_punct(",")
            w = self.expect_num()
            self.expect_punct(",")
            h = self.expect_num()
            self.expect_punct(")")
            return Rect(cx, cy, w, h)
        if head.text == "polygon":
            self.expect_punct("(")
            nums = [self.expect_num()]
            while self.peek().kind == "PUNCT" and self.peek().text == ",":
                self.next()
                nums.append(self.expect_num())
            self.expect_punct(")")
            if len(nums) % 2 != 0:
                self.fail("an even count of polygon coordinates", self.peek())
            verts = tuple(
                (nums[j], nums[j + 1]) for j in range(0, len(nums), 2)
            )
            return Polygon(verts)
        self.fail("a profile (circle, rect, or polygon)", head)

    def parse_body(self) -> Body:
        head = self.expect_word("a statement kind")
        if head.text == "workspace":
            self.expect_punct("(")
            plane_tok = self.expect_word("a plane (XY, YZ, or ZX)")
            if plane_tok.text not in PLANES:
                self.fail("a plane (XY, YZ, or ZX)", plane_tok)
            self.expect_punct(",")
            x = self.expect_num()
            self.expect_punct(",")
            y = self.expect_num()
            self.expect_punct(",")
            z = self.expect_num()
            self.expect_punct(")")
            return WorkspaceDef(plane_tok.text, (x, y, z))
        if head.text == "sketch":
            self.expect_punct("(")
            ws = self.expect_id()
            profiles = []
            while self.peek().kind == "PUNCT" and self.peek().text == ",":
                self.next()
                profiles.append(self.parse_profile())
            self.expect_punct(")")
            return SketchDef(ws, tuple(profiles))
        if head.text == "extrude":
            self.expect_punct("(")
            sk = self.expect_id()
            self.expect_punct(",")
            h = self.expect_num()
            self.expect_punct(")")
            return ExtrudeDef(sk, h)
        if head.text in BOOLEAN_OPS:
            self.expect_punct("(")
            a = self.expect_id()
            self.expect_punct(",")
            b = self.expect_id()
            self.expect_punct(")")
            return BooleanDef(head.text, a, b)
        self.fail("workspace, sketch, extrude, union, cut, or intersect", head)


def parse(text: str) -> Program:
    """Parse and validate program text.

    Raises ProgramSyntaxError with the source position for malformed text
    and ProgramSemanticError for well-formed text that breaks a rule
    (duplicate or undefined ids, kind mismatches, bad profile geometry).
    """
    p = _Parser(_lex(text))
    statements = []
    while True:
        tok = p.peek()
        if tok.kind == "WORD" and tok.text == "result":
            break
        if tok.kind == "EOF":
            p.fail("a statement or 'result(id)'", tok)
        ident_tok = p.expect_word("an identifier")
        if ident_tok.text in KEYWORDS:
            p.fail("an identifier (keyword is reserved)", ident_tok)
        if not _ID_RE.match(ident_tok.text):
            p.fail("an identifier ([a-z][a-z0-9_]*)", ident_tok)
        p.expect_punct("=")
        statements.append(Statement(ident_tok.text, p.parse_body()))
    p.next()  # result
    p.expect_punct("(")
    result_id = p.expect_id()
    p.expect_punct(")")
    tail = p.next()
    if tail.kind != "EOF":
        p.fail("end of input", tail)
    program = Program(tuple(statements), result_id)
    validate(program)
    return program


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _require_finite(value: float, what: str):
    if not math.isfinite(value):
        raise ProgramSemanticError(f"{what} must be finite, got {value!r}")


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py):
    # Collinearity is assumed; checks the bounding box only.
    return (
        min(ax, bx) <= px <= max(ax, bx)
        and min(ay, by) <= py <= max(ay, by)
    )


def _segments_intersect(p1, p2, p3, p4):
    """True when closed segments p1p2 and p3p4 share any point."""
    d1 = _orient(*p3, *p4, *p1)
    d2 = _orient(*p3, *p4, *p2)
    d3 = _orient(*p1, *p2, *p3)
    d4 = _orient(*p1, *p2, *p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(*p3, *p4, *p1):
        return True
    if d2 == 0 and _on_segment(*p3, *p4, *p2):
        return True
    if d3 == 0 and _on_segment(*p1, *p2, *p3):
        return True
    if d4 == 0 and _on_segment(*p1, *p2, *p4):
        return True
    return False


def polygon_area(vertices) -> float:
    """Signed shoelace area; positive for counter-clockwise order."""
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def _check_polygon(poly: Polygon):
    verts = poly.vertices
    if len(verts) < 3:
        raise ProgramSemanticError("polygon needs at least 3 vertices")
    for x, y in verts:
        _require_finite(x, "polygon coordinate")
        _require_finite(y, "polygon coordinate")
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        if a == b:
            raise ProgramSemanticError("polygon has a zero-length edge")
    if polygon_area(verts) == 0.0:
        raise ProgramSemanticError("polygon has zero area")
    # Simplicity: no two non-adjacent edges may touch; adjacent edges may
    # share only their common endpoint (no collinear fold-backs).
    for i in range(n):
        a1, a2 = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = verts[j], verts[(j + 1) % n]
            if _segments_intersect(a1, a2, b1, b2):
                raise ProgramSemanticError("polygon is self-intersecting")
    for i in range(n):
        a = verts[(i - 1) % n]
        b = verts[i]
        c = verts[(i + 1) % n]
        if _orient(*a, *b, *c) == 0.0:
            dot = (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1])
            if dot < 0:
                raise ProgramSemanticError("polygon folds back on itself")


def _check_profile(profile: Profile):
    if isinstance(profile, Circle):
        for v, what in ((profile.cx, "circle center"), (profile.cy, "circle center"), (profile.r, "circle radius")):
            _require_finite(v, what)
        if profile.r <= 0:
            raise ProgramSemanticError("circle radius must be positive")
    elif isinstance(profile, Rect):
        for v, what in ((profile.cx, "rect center"), (profile.cy, "rect center"),
                        (profile.w, "rect width"), (profile.h, "rect height")):
            _require_finite(v, what)
        if profile.w <= 0 or profile.h <= 0:
            raise ProgramSemanticError("rect sides must be positive")
    else:
        _check_polygon(profile)


def validate(program: Program) -> None:
    """Check every semantic rule; raises ProgramSemanticError on the first
    violation. Dead statements are permitted (canonicalize removes them)."""
    seen: dict[str, str] = {}
    for st in program.statements:
        if st.id in KEYWORDS or not _ID_RE.match(st.id):
            raise ProgramSemanticError("invalid identifier", st.id)
        if st.id in seen:
            raise ProgramSemanticError("identifier defined twice", st.id)
        body = st.body
        if isinstance(body, WorkspaceDef):
            if body.plane not in PLANES:
                raise ProgramSemanticError(f"unknown plane {body.plane!r}")
            if len(body.origin) != 3:
                raise ProgramSemanticError("workspace origin needs 3 numbers")
            for v in body.origin:
                _require_finite(v, "workspace origin")
        elif isinstance(body, SketchDef):
            ref_kind = seen.get(body.workspace_id)
            if ref_kind is None:
                raise ProgramSemanticError("undefined identifier", body.workspace_id)
            if ref_kind != "workspace":
                raise ProgramSemanticError("sketch must reference a workspace", body.workspace_id)
            if not body.profiles:
                raise ProgramSemanticError("sketch needs at least one profile", st.id)
            for prof in body.profiles:
                _check_profile(prof)
        elif isinstance(body, ExtrudeDef):
            ref_kind = seen.get(body.sketch_id)
            if ref_kind is None:
                raise ProgramSemanticError("undefined identifier", body.sketch_id)
            if ref_kind != "sketch":
                raise ProgramSemanticError("extrude must reference a sketch", body.sketch_id)
            _require_finite(body.height, "extrude height")
            if body.height <= 0:
                raise ProgramSemanticError("extrude height must be positive")
        elif isinstance(body, BooleanDef):
            if body.op not in BOOLEAN_OPS:
                raise ProgramSemanticError(f"unknown boolean op {body.op!r}")
            for ref in (body.left_id, body.right_id):
                ref_kind = seen.get(ref)
                if ref_kind is None:
                    raise ProgramSemanticError("undefined identifier", ref)
                if ref_kind != "solid":
                    raise ProgramSemanticError("boolean must reference solids", ref)
        else:
            raise ProgramSemanticError(f"unknown statement body {body!r}")
        seen[st.id] = statement_kind(body)
    result_kind = seen.get(program.result_id)
    if result_kind is None:
        raise ProgramSemanticError("undefined identifier", program.result_id)
    if result_kind != "solid":
        raise ProgramSemanticError("result must name a solid", program.result_id)


# ---------------------------------------------------------------------------
# Canonical form, printing, counting
# ---------------------------------------------------------------------------

def canonicalize(program: Program) -> Program:
    """Drop statements unreachable from the result and order the rest by a
    deterministic dependency walk. Idempotent; preserves identifiers."""
    by_id = {st.id: st for st in program.statements}
    order: list[Statement] = []
    visited: set[str] = set()
    stack: list[tuple[str, bool]] = [(program.result_id, False)]
    while stack:
        ident, expanded = stack.pop()
        if expanded:
            order.append(by_id[ident])
            continue
        if ident in visited:
            continue
        visited.add(ident)
        stack.append((ident, True))
        for ref in reversed(references(by_id[ident].body)):
            if ref not in visited:
                stack.append((ref, False))
    return Program(tuple(order), program.result_id)


def format_number(x: float) -> str:
    """Shortest decimal text that parses back to exactly x."""
    xf = float(x)
    if xf == int(xf) and abs(xf) < 1e16:
        return str(int(xf))
    return repr(xf)


def _render_profile(profile: Profile) -> str:
    f = format_number
    if isinstance(profile, Circle):
        return f"circle({f(profile.cx)},{f(profile.cy)},{f(profile.r)})"
    if isinstance(profile, Rect):
        return f"rect({f(profile.cx)},{f(profile.cy)},{f(profile.w)},{f(profile.h)})"
    coords = ",".join(f(c) for xy in profile.vertices for c in xy)
    return f"polygon({coords})"


def _render_body(body: Body) -> str:
    f = format_number
    if isinstance(body, WorkspaceDef):
        x, y, z = body.origin
        return f"workspace({body.plane},{f(x)},{f(y)},{f(z)})"
    if isinstance(body, SketchDef):
        parts = ",".join(_render_profile(p) for p in body.profiles)
        return f"sketch({body.workspace_id},{parts})"
    if isinstance(body, ExtrudeDef):
        return f"extrude({body.sketch_id},{f(body.height)})"
    return f"{body.op}({body.left_id},{body.right_id})"


def print_program(program: Program) -> str:
    """Canonical text: one statement per line, then the result line."""
    canon = canonicalize(program)
    lines = [f"{st.id}={_render_body(st.body)}" for st in canon.statements]
    lines.append(f"result({canon.result_id})")
    return "\n".join(lines) + "\n"


def count_tokens(program: Program) -> int:
    """Lexical token count of the canonical printed text."""
    return len(_lex(print_program(program))) - 1  # minus EOF


def workspace_count(program: Program) -> int:
    """Workspaces reachable from the result."""
    canon = canonicalize(program)
    return sum(1 for st in canon.statements if isinstance(st.body, WorkspaceDef))


def program_hash(program: Program) -> str:
    """Short stable digest of the canonical text."""
    text = print_program(program)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
