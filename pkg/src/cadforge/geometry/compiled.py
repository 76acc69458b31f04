"""Flat array form of a program's solid.

Executing a program repeatedly evaluates point membership over large
batches, so the reachable solid is lowered once into plain numpy tables
the kernels can walk without touching Python objects:

* one primitive row per extrude (plane code, origin, height, profile slice),
* one profile row per sketch profile (kind code, packed params, vertex slice),
* one instruction per solid statement, in canonical order. Booleans refer
  to earlier instruction slots, so shared sub-solids are evaluated once
  and the last slot is always the program result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dsl import (
    BooleanDef,
    Circle,
    ExtrudeDef,
    Polygon,
    Program,
    Rect,
    canonicalize,
    polygon_area,
)
from ..errors import DegenerateProfileError

PLANE_CODE = {"XY": 0, "YZ": 1, "ZX": 2}
OP_PRIM, OP_UNION, OP_INTERSECT, OP_CUT = 0, 1, 2, 3
_BOOL_CODE = {"union": OP_UNION, "intersect": OP_INTERSECT, "cut": OP_CUT}
KIND_CIRCLE, KIND_RECT, KIND_POLYGON = 0, 1, 2

#: Local frame axes per plane code: world = origin + u*U + v*V + w*W.
PLANE_AXES = {
    0: (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),
    1: (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0])),
    2: (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])),
}


@dataclass
class CompiledSolid:
    prim_plane: np.ndarray      # int8 (P,)
    prim_origin: np.ndarray     # float64 (P, 3)
    prim_height: np.ndarray     # float64 (P,)
    prim_prof_start: np.ndarray  # int64 (P,)
    prim_prof_end: np.ndarray    # int64 (P,)
    prof_kind: np.ndarray       # int8 (F,)
    prof_params: np.ndarray     # float64 (F, 4)
    prof_poly_start: np.ndarray  # int64 (F,)
    prof_poly_end: np.ndarray    # int64 (F,)
    poly_verts: np.ndarray      # float64 (V, 2)
    instr_op: np.ndarray        # int8 (S,)
    instr_a: np.ndarray         # int64 (S,)
    instr_b: np.ndarray         # int64 (S,)

    @property
    def n_primitives(self) -> int:
        return len(self.prim_plane)

    @property
    def n_instructions(self) -> int:
        return len(self.instr_op)

    def tables(self) -> tuple:
        """Arguments the membership kernels expect, in order."""
        return (
            self.prim_plane, self.prim_origin, self.prim_height,
            self.prim_prof_start, self.prim_prof_end,
            self.prof_kind, self.prof_params,
            self.prof_poly_start, self.prof_poly_end, self.poly_verts,
            self.instr_op, self.instr_a, self.instr_b,
        )


def compile_program(program: Program) -> CompiledSolid:
    canon = canonicalize(program)
    by_id = {st.id: st for st in canon.statements}

    prim_plane, prim_origin, prim_height = [], [], []
    prim_prof_start, prim_prof_end = [], []
    prof_kind, prof_params = [], []
    prof_poly_start, prof_poly_end = [], []
    poly_verts: list[tuple[float, float]] = []
    instr_op, instr_a, instr_b = [], [], []
    slot: dict[str, int] = {}

    def add_profile(profile):
        start = len(poly_verts)
        if isinstance(profile, Circle):
            prof_kind.append(KIND_CIRCLE)
            prof_params.append((profile.cx, profile.cy, profile.r, 0.0))
        elif isinstance(profile, Rect):
            prof_kind.append(KIND_RECT)
            prof_params.append((profile.cx, profile.cy, profile.w, profile.h))
        else:
            if polygon_area(profile.vertices) == 0.0:
                raise DegenerateProfileError("polygon has zero area")
            prof_kind.append(KIND_POLYGON)
            prof_params.append((0.0, 0.0, 0.0, 0.0))
            poly_verts.extend(profile.vertices)
        prof_poly_start.append(start)
        prof_poly_end.append(len(poly_verts))

    for st in canon.statements:
        body = st.body
        if isinstance(body, ExtrudeDef):
            sketch = by_id[body.sketch_id].body
            workspace = by_id[sketch.workspace_id].body
            prim_idx = len(prim_plane)
            prim_plane.append(PLANE_CODE[workspace.plane])
            prim_origin.append(workspace.origin)
            prim_height.append(body.height)
            prim_prof_start.append(len(prof_kind))
            for profile in sketch.profiles:
                add_profile(profile)
            prim_prof_end.append(len(prof_kind))
            slot[st.id] = len(instr_op)
            instr_op.append(OP_PRIM)
            instr_a.append(prim_idx)
            instr_b.append(0)
        elif isinstance(body, BooleanDef):
            slot[st.id] = len(instr_op)
            instr_op.append(_BOOL_CODE[body.op])
            instr_a.append(slot[body.left_id])
            instr_b.append(slot[body.right_id])

    assert slot[canon.result_id] == len(instr_op) - 1

    return CompiledSolid(
        prim_plane=np.asarray(prim_plane, np.int8),
        prim_origin=np.asarray(prim_origin, np.float64).reshape(-1, 3),
        prim_height=np.asarray(prim_height, np.float64),
        prim_prof_start=np.asarray(prim_prof_start, np.int64),
        prim_prof_end=np.asarray(prim_prof_end, np.int64),
        prof_kind=np.asarray(prof_kind, np.int8),
        prof_params=np.asarray(prof_params, np.float64).reshape(-1, 4),
        prof_poly_start=np.asarray(prof_poly_start, np.int64),
        prof_poly_end=np.asarray(prof_poly_end, np.int64),
        poly_verts=np.asarray(poly_verts, np.float64).reshape(-1, 2),
        instr_op=np.asarray(instr_op, np.int8),
        instr_a=np.asarray(instr_a, np.int64),
        instr_b=np.asarray(instr_b, np.int64),
    )
