"""Parser, validator, canonicalizer and printer behaviour."""
import numpy as np
import pytest

from cadforge import dsl
from cadforge.errors import ProgramSemanticError, ProgramSyntaxError
from cadforge.proposer import NEUTRAL_PARAMS, default_weights, sample_program

from conftest import MINIMAL_TEXT
from oracles import naive_membership, random_tree_program


def test_minimal_program_golden():
    p = dsl.parse(MINIMAL_TEXT)
    assert dsl.print_program(dsl.canonicalize(p)) == MINIMAL_TEXT
    assert dsl.count_tokens(p) == 39
    assert dsl.workspace_count(p) == 1


def test_token_count_is_lexeme_count():
    # w0 = workspace ( XY , 0 , 0 , 0 )  -> 12 lexemes
    p = dsl.parse("w0 = workspace(XY, 0, 0, 0)\ns0 = sketch(w0, rect(0, 0, 1, 1))\ne0 = extrude(s0, 1)\nresult(e0)\n")
    assert dsl.count_tokens(p) == 12 + 17 + 8 + 4


def test_whitespace_does_not_matter():
    noisy = (
        "w0   =workspace( XY ,0, 0,0 )\n\n"
        "s0 = sketch(w0, circle(0, 0, 0.4))\n"
        "e0 = extrude(s0, 0.5)\n"
        "result(e0)\n"
    )
    assert dsl.print_program(dsl.canonicalize(dsl.parse(noisy))) == MINIMAL_TEXT


def test_round_trip_sampled_programs():
    weights = default_weights()
    for i in range(1000):
        p = sample_program(weights, NEUTRAL_PARAMS, np.random.default_rng(900_000 + i))
        canon = dsl.canonicalize(p)
        text = dsl.print_program(canon)
        again = dsl.parse(text)
        assert again == canon
        assert dsl.print_program(again) == text


def test_round_trip_tree_programs():
    for i in range(200):
        rng = np.random.default_rng(41_000 + i)
        p = random_tree_program(rng, depth=4)
        dsl.validate(p)
        canon = dsl.canonicalize(p)
        assert dsl.parse(dsl.print_program(canon)) == canon


def test_number_format_round_trips_exactly():
    values = [0.1 + 0.2, -2.0, 3.0, 1e-07, 123.456, -0.0625, 1.0 / 3.0]
    for v in values:
        assert float(dsl.format_number(v)) == v


def test_dead_code_removed_and_geometry_preserved():
    rng = np.random.default_rng(7)
    for i in range(50):
        p = sample_program(default_weights(), NEUTRAL_PARAMS, np.random.default_rng(10_000 + i))
        # graft an unused workspace/sketch/extrude chain in front
        junk = dsl.parse(MINIMAL_TEXT.replace("w0", "zw").replace("s0", "zs").replace("e0", "ze"))
        fat = dsl.Program(junk.statements[:-1] + p.statements, p.result_id)
        dsl.validate(fat)
        canon = dsl.canonicalize(fat)
        ids = {s.id for s in canon.statements}
        assert "zw" not in ids and "ze" not in ids
        assert len(canon.statements) < len(fat.statements)
        # token count is defined over the canonical form, so dead code
        # never inflates it
        assert dsl.count_tokens(fat) == dsl.count_tokens(canon)
        pts = rng.uniform(-1.5, 1.5, (256, 3))
        assert np.array_equal(naive_membership(fat, pts), naive_membership(canon, pts))


def test_canonical_form_is_order_insensitive():
    a = dsl.parse(
        "wa=workspace(XY,0,0,0)\n"
        "wb=workspace(YZ,1,0,0)\n"
        "sa=sketch(wa,circle(0,0,0.3))\n"
        "sb=sketch(wb,rect(0,0,1,1))\n"
        "ea=extrude(sa,1)\n"
        "eb=extrude(sb,0.5)\n"
        "u=union(ea,eb)\n"
        "result(u)\n"
    )
    b = dsl.parse(
        "wb=workspace(YZ,1,0,0)\n"
        "sb=sketch(wb,rect(0,0,1,1))\n"
        "wa=workspace(XY,0,0,0)\n"
        "eb=extrude(sb,0.5)\n"
        "sa=sketch(wa,circle(0,0,0.3))\n"
        "ea=extrude(sa,1)\n"
        "u=union(ea,eb)\n"
        "result(u)\n"
    )
    assert dsl.print_program(dsl.canonicalize(a)) == dsl.print_program(dsl.canonicalize(b))


def test_canonical_statements_in_dependency_order():
    for i in range(100):
        rng = np.random.default_rng(52_000 + i)
        canon = dsl.canonicalize(random_tree_program(rng, depth=3))
        seen: set[str] = set()
        for st in canon.statements:
            body = st.body
            if isinstance(body, dsl.SketchDef):
                assert body.workspace_id in seen
            elif isinstance(body, dsl.ExtrudeDef):
                assert body.sketch_id in seen
            elif isinstance(body, dsl.BooleanDef):
                assert body.left_id in seen and body.right_id in seen
            seen.add(st.id)
        assert canon.result_id == canon.statements[-1].id


def test_printer_idempotent_on_sampled_programs():
    for i in range(100):
        p = sample_program(default_weights(), NEUTRAL_PARAMS, np.random.default_rng(31_000 + i))
        text = dsl.print_program(dsl.canonicalize(p))
        assert dsl.print_program(dsl.parse(text)) == text


def test_dangling_result_rejected():
    with pytest.raises(ProgramSemanticError):
        dsl.parse("w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\nresult(e9)\n")


@pytest.mark.parametrize(
    "text",
    [
        # use before definition
        "s0=sketch(w0,circle(0,0,0.4))\nw0=workspace(XY,0,0,0)\ne0=extrude(s0,0.5)\nresult(e0)\n",
        # duplicate identifier
        "w0=workspace(XY,0,0,0)\nw0=workspace(YZ,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\nresult(e0)\n",
        # sketch over a non-workspace
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\ns1=sketch(e0,circle(0,0,0.1))\ne1=extrude(s1,0.1)\nresult(e1)\n",
        # boolean over a sketch
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\nu0=union(e0,s0)\nresult(u0)\n",
        # result names a workspace
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\nresult(w0)\n",
        # negative extrusion
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,-0.5)\nresult(e0)\n",
        # zero radius
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0))\ne0=extrude(s0,0.5)\nresult(e0)\n",
        # two-vertex polygon
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,polygon(0,0,1,0))\ne0=extrude(s0,0.5)\nresult(e0)\n",
        # self-intersecting bowtie
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,polygon(0,0,1,1,1,0,0,1))\ne0=extrude(s0,0.5)\nresult(e0)\n",
    ],
)
def test_semantic_errors(text):
    with pytest.raises(ProgramSemanticError):
        dsl.parse(text)


@pytest.mark.parametrize(
    "text",
    [
        "w0=workspace(XY,0,0,0",
        "w0=workspace(XY,0,0,0)\nresult e0\n",
        "w0=workspace(XZ,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\nresult(e0)\n",
        "W0=workspace(XY,0,0,0)\ns0=sketch(W0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\nresult(e0)\n",
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,blob(0,0,0.4))\ne0=extrude(s0,0.5)\nresult(e0)\n",
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\ne0=extrude(s0,0.5)\n",
        "",
    ],
)
def test_syntax_errors(text):
    with pytest.raises((ProgramSyntaxError, ProgramSemanticError)):
        dsl.parse(text)


def test_validator_rejects_nonfinite_numbers():
    p = dsl.parse(MINIMAL_TEXT)
    ws = dsl.Statement("w0", dsl.WorkspaceDef("XY", (0.0, float("nan"), 0.0)))
    bad = dsl.Program((ws,) + p.statements[1:], p.result_id)
    with pytest.raises(ProgramSemanticError):
        dsl.validate(bad)


def test_polygon_area_signed():
    ccw = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    assert dsl.polygon_area(ccw) == pytest.approx(1.0)
    assert dsl.polygon_area(list(reversed(ccw))) == pytest.approx(-1.0)


def test_program_hash_tracks_canonical_form():
    p = dsl.parse(MINIMAL_TEXT)
    noisy = dsl.parse("w0 = workspace(XY, 0, 0, 0)\ns0 = sketch(w0, circle(0, 0, 0.4))\ne0 = extrude(s0, 0.5)\nresult(e0)\n")
    assert dsl.program_hash(p) == dsl.program_hash(noisy)
    other = dsl.parse(MINIMAL_TEXT.replace("0.4", "0.41"))
    assert dsl.program_hash(p) != dsl.program_hash(other)
