"""Solid execution: membership oracles, bounding boxes, occupancy grids.

Executing a program yields a MembershipOracle — an implicit solid that
answers point-in-solid queries — rather than a mesh. Emptiness is lazy: a
provably empty result (e.g. intersecting disjoint boxes) is only reported
when something tries to sample it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..dsl import Program, program_hash
from ..errors import CadforgeError
from .compiled import (
    KIND_CIRCLE,
    KIND_RECT,
    OP_CUT,
    OP_INTERSECT,
    OP_PRIM,
    OP_UNION,
    PLANE_AXES,
    CompiledSolid,
    compile_program,
)
from .kernels import eval_membership


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box. ``empty`` marks a provably empty region; lo/hi are
    meaningless in that case."""

    lo: np.ndarray
    hi: np.ndarray
    empty: bool = False

    def __eq__(self, other):
        if not isinstance(other, Aabb):
            return NotImplemented
        if self.empty or other.empty:
            return self.empty == other.empty
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        if self.empty:
            return hash(("aabb", "empty"))
        return hash(("aabb", tuple(self.lo), tuple(self.hi)))

    def diagonal(self) -> float:
        if self.empty:
            return 0.0
        return float(np.linalg.norm(self.hi - self.lo))

    def extent(self) -> np.ndarray:
        if self.empty:
            return np.zeros(3)
        return self.hi - self.lo

    def join(self, other: "Aabb") -> "Aabb":
        if self.empty:
            return other
        if other.empty:
            return self
        return Aabb(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def meet(self, other: "Aabb") -> "Aabb":
        if self.empty or other.empty:
            return EMPTY_AABB
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return EMPTY_AABB
        return Aabb(lo, hi)

    def scaled_about_center(self, factor: float) -> "Aabb":
        if self.empty:
            return self
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * factor * (self.hi - self.lo)
        return Aabb(center - half, center + half)


EMPTY_AABB = Aabb(np.zeros(3), np.zeros(3), empty=True)


def _profile_bounds_2d(cs: CompiledSolid, f: int) -> tuple[float, float, float, float]:
    kind = cs.prof_kind[f]
    if kind == KIND_CIRCLE:
        cx, cy, r, _ = cs.prof_params[f]
        return cx - r, cx + r, cy - r, cy + r
    if kind == KIND_RECT:
        cx, cy, w, h = cs.prof_params[f]
        return cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2
    verts = cs.poly_verts[cs.prof_poly_start[f]: cs.prof_poly_end[f]]
    return (
        float(verts[:, 0].min()), float(verts[:, 0].max()),
        float(verts[:, 1].min()), float(verts[:, 1].max()),
    )


def _primitive_aabb(cs: CompiledSolid, k: int) -> Aabb:
    u0 = v0 = np.inf
    u1 = v1 = -np.inf
    for f in range(cs.prim_prof_start[k], cs.prim_prof_end[k]):
        a, b, c, d = _profile_bounds_2d(cs, f)
        u0, u1 = min(u0, a), max(u1, b)
        v0, v1 = min(v0, c), max(v1, d)
    axis_u, axis_v, axis_w = PLANE_AXES[int(cs.prim_plane[k])]
    origin = cs.prim_origin[k]
    h = cs.prim_height[k]
    corners_lo = origin + u0 * axis_u + v0 * axis_v
    corners_hi = origin + u1 * axis_u + v1 * axis_v + h * axis_w
    return Aabb(np.minimum(corners_lo, corners_hi), np.maximum(corners_lo, corners_hi))


def _solid_aabb(cs: CompiledSolid) -> Aabb:
    """Conservative box per instruction slot: exact for primitives and
    unions, over-approximate for cut (left box) and intersect (box meet)."""
    boxes: list[Aabb] = []
    for s in range(cs.n_instructions):
        op = cs.instr_op[s]
        if op == OP_PRIM:
            boxes.append(_primitive_aabb(cs, int(cs.instr_a[s])))
        elif op == OP_UNION:
            boxes.append(boxes[cs.instr_a[s]].join(boxes[cs.instr_b[s]]))
        elif op == OP_INTERSECT:
            boxes.append(boxes[cs.instr_a[s]].meet(boxes[cs.instr_b[s]]))
        elif op == OP_CUT:
            boxes.append(boxes[cs.instr_a[s]])
    return boxes[-1]


class MembershipOracle:
    """Implicit solid: point membership plus a conservative bounding box."""

    def __init__(self, compiled: CompiledSolid, bbox: Aabb, source_hash: str):
        self.compiled = compiled
        self.bbox = bbox
        self.source_hash = source_hash
        self._faces = None  # built lazily by the surface sampler

    def contains(self, points) -> np.ndarray | bool:
        """Membership of a point (3,) or a batch (n, 3). Points on the
        boundary resolve by the inclusive comparisons of the kernels; a
        tolerance band of about 1e-9 around faces is unspecified."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        if single:
            pts = pts.reshape(1, 3)
        out = eval_membership(self.compiled, pts)
        return bool(out[0]) if single else out


def execute(program: Program) -> MembershipOracle:
    """Compile the program's result solid into a membership oracle."""
    compiled = compile_program(program)
    return MembershipOracle(compiled, _solid_aabb(compiled), program_hash(program))


# ---------------------------------------------------------------------------
# Occupancy grids
# ---------------------------------------------------------------------------

@dataclass
class OccupancyGrid:
    resolution: int
    frame: Aabb
    bits: np.ndarray  # bool (r, r, r), x-major

    @property
    def occupied(self) -> int:
        return int(self.bits.sum())


def occupancy_grid(
    oracle: MembershipOracle,
    resolution: int = 64,
    frame: Aabb | None = None,
    transform: tuple[float, np.ndarray] | None = None,
) -> OccupancyGrid:
    """Cell-center membership over a regular grid.

    ``frame`` defaults to the oracle's bounding box. When ``transform``
    (scale, offset) is given, the frame lives in the transformed space
    ``p * scale + offset`` and centers are mapped back before evaluation —
    this is how normalized-space grids of a model-space solid are built.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if frame is None:
        frame = oracle.bbox
        if transform is not None:
            scale, offset = transform
            frame = Aabb(frame.lo * scale + offset, frame.hi * scale + offset, frame.empty)
    if frame.empty:
        bits = np.zeros((resolution,) * 3, np.bool_)
        return OccupancyGrid(resolution, frame, bits)
    axes = [
        frame.lo[d] + (np.arange(resolution) + 0.5) * (frame.hi[d] - frame.lo[d]) / resolution
        for d in range(3)
    ]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    if transform is not None:
        scale, offset = transform
        centers = (centers - offset) / scale
    bits = oracle.contains(centers).reshape((resolution,) * 3)
    return OccupancyGrid(resolution, frame, bits)


_GRID_MAGIC = b"OCCG"
_GRID_HEADER = struct.Struct("<4sIII")  # magic, resolution, two reserved words


def save_grid(grid: OccupancyGrid, path) -> None:
    """Binary dump: 16-byte header then bit-packed cells in x-major order."""
    packed = np.packbits(grid.bits.ravel().astype(np.uint8))
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(_GRID_MAGIC, grid.resolution, 0, 0))
        fh.write(packed.tobytes())


def load_grid(path, frame: Aabb | None = None) -> OccupancyGrid:
    with open(path, "rb") as fh:
        header = fh.read(_GRID_HEADER.size)
        if len(header) != _GRID_HEADER.size:
            raise CadforgeError("grid file too short")
        magic, resolution, _, _ = _GRID_HEADER.unpack(header)
        if magic != _GRID_MAGIC:
            raise CadforgeError("not an occupancy grid file")
        packed = np.frombuffer(fh.read(), np.uint8)
    n = resolution ** 3
    bits = np.unpackbits(packed)[:n].astype(np.bool_).reshape((resolution,) * 3)
    if frame is None:
        frame = Aabb(np.zeros(3), np.ones(3))
    return OccupancyGrid(resolution, frame, bits)
