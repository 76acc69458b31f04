"""Boundary sampling of executed solids.

Candidates are drawn area-proportionally from the boundary faces of every
primitive in the tree: the side wall of each profile (area = curve length
x extrude height) and its two caps (area = profile area, triangulated for
polygons). A candidate c with face normal n survives only when
``contains(c + eps*n) != contains(c - eps*n)`` with eps = 1e-4 times the
bounding-box diagonal, which keeps exactly the candidates lying on the
boundary of the full CSG result — including cavity walls — and discards
faces swallowed by unions or removed by cuts.

Draws arrive in fixed-size batches until ``m`` points are kept or the
attempt budget ``100 * m`` runs out; the kept points, in draw order, are
the sample. Zero survivors mean the solid is empty (or has measure-zero
boundary) and raise EmptyResultError. Everything is deterministic in the
seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dsl import polygon_area
from ..errors import EmptyResultError
from .compiled import KIND_CIRCLE, KIND_RECT, PLANE_AXES, CompiledSolid
from .oracle import MembershipOracle
from .pointcloud import PointCloud, Sampled

EPSILON_FACTOR = 1e-4
ATTEMPT_FACTOR = 100


@dataclass
class _Face:
    area: float
    # generate(rng, n) -> (points (n, 3), unit normals (n, 3))
    generate: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def _triangulate(verts: np.ndarray) -> list[tuple[int, int, int]]:
    """Ear clipping of a simple polygon given in CCW order."""
    n = len(verts)
    if n == 3:
        return [(0, 1, 2)]
    idx = list(range(n))
    tris: list[tuple[int, int, int]] = []

    def cross(o, a, b):
        return (verts[a, 0] - verts[o, 0]) * (verts[b, 1] - verts[o, 1]) - (
            verts[a, 1] - verts[o, 1]
        ) * (verts[b, 0] - verts[o, 0])

    def point_in_tri(p, a, b, c):
        d1 = (verts[a, 0] - p[0]) * (verts[b, 1] - p[1]) - (verts[a, 1] - p[1]) * (verts[b, 0] - p[0])
        d2 = (verts[b, 0] - p[0]) * (verts[c, 1] - p[1]) - (verts[b, 1] - p[1]) * (verts[c, 0] - p[0])
        d3 = (verts[c, 0] - p[0]) * (verts[a, 1] - p[1]) - (verts[c, 1] - p[1]) * (verts[a, 0] - p[0])
        has_neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
        has_pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
        return not (has_neg and has_pos)

    guard = 0
    while len(idx) > 3 and guard < 4 * n * n:
        guard += 1
        m = len(idx)
        clipped = False
        for k in range(m):
            a, b, c = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            if cross(a, b, c) <= 0:
                continue
            ok = True
            for other in idx:
                if other in (a, b, c):
                    continue
                if point_in_tri(verts[other], a, b, c):
                    ok = False
                    break
            if ok:
                tris.append((a, b, c))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            # Numerically stuck; clip the sharpest remaining convex corner.
            best = max(range(len(idx)), key=lambda k: cross(
                idx[(k - 1) % len(idx)], idx[k], idx[(k + 1) % len(idx)]))
            m = len(idx)
            tris.append((idx[(best - 1) % m], idx[best], idx[(best + 1) % m]))
            idx.pop(best)
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def _profile_boundary(cs: CompiledSolid, f: int):
    """2-d boundary description: (perimeter, sampler of curve points and
    outward normals), plus (area, sampler of interior points)."""
    kind = cs.prof_kind[f]
    if kind == KIND_CIRCLE:
        cx, cy, r, _ = cs.prof_params[f]

        def curve(rng, n):
            theta = rng.uniform(0.0, 2.0 * math.pi, n)
            nx, ny = np.cos(theta), np.sin(theta)
            return np.stack([cx + r * nx, cy + r * ny], 1), np.stack([nx, ny], 1)

        def interior(rng, n):
            rr = r * np.sqrt(rng.uniform(0.0, 1.0, n))
            theta = rng.uniform(0.0, 2.0 * math.pi, n)
            return np.stack([cx + rr * np.cos(theta), cy + rr * np.sin(theta)], 1)

        return 2.0 * math.pi * r, curve, math.pi * r * r, interior

    if kind == KIND_RECT:
        cx, cy, w, h = cs.prof_params[f]
        corners = np.array([
            [cx - w / 2, cy - h / 2],
            [cx + w / 2, cy - h / 2],
            [cx + w / 2, cy + h / 2],
            [cx - w / 2, cy + h / 2],
        ])
        verts = corners
    else:
        verts = cs.poly_verts[cs.prof_poly_start[f]: cs.prof_poly_end[f]].copy()
        if polygon_area([tuple(v) for v in verts]) < 0:
            verts = verts[::-1].copy()  # normals and triangulation want CCW

    nxt = np.roll(verts, -1, axis=0)
    edges = nxt - verts
    lengths = np.linalg.norm(edges, axis=1)
    perimeter = float(lengths.sum())
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    # Outward normal of a CCW edge is (dy, -dx) / len.
    normals = np.stack([edges[:, 1], -edges[:, 0]], 1) / lengths[:, None]

    def curve(rng, n, verts=verts, edges=edges, cum=cum, normals=normals, perimeter=perimeter):
        s = rng.uniform(0.0, perimeter, n)
        e = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(edges) - 1)
        t = (s - cum[e]) / np.maximum(cum[e + 1] - cum[e], 1e-300)
        pts = verts[e] + t[:, None] * edges[e]
        return pts, normals[e]

    tris = _triangulate(verts)
    tri_pts = np.array([[verts[a], verts[b], verts[c]] for a, b, c in tris])
    tri_areas = np.abs(
        (tri_pts[:, 1, 0] - tri_pts[:, 0, 0]) * (tri_pts[:, 2, 1] - tri_pts[:, 0, 1])
        - (tri_pts[:, 1, 1] - tri_pts[:, 0, 1]) * (tri_pts[:, 2, 0] - tri_pts[:, 0, 0])
    ) * 0.5
    area = float(tri_areas.sum())
    tri_probs = tri_areas / area

    def interior(rng, n, tri_pts=tri_pts, tri_probs=tri_probs):
        ti = rng.choice(len(tri_probs), size=n, p=tri_probs)
        r1 = np.sqrt(rng.uniform(0.0, 1.0, n))[:, None]
        r2 = rng.uniform(0.0, 1.0, n)[:, None]
        a, b, c = tri_pts[ti, 0], tri_pts[ti, 1], tri_pts[ti, 2]
        return (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c

    return perimeter, curve, area, interior


def _build_faces(cs: CompiledSolid) -> list[_Face]:
    faces: list[_Face] = []
    for k in range(cs.n_primitives):
        axis_u, axis_v, axis_w = PLANE_AXES[int(cs.prim_plane[k])]
        origin = cs.prim_origin[k]
        height = float(cs.prim_height[k])

        def to_world(uv, w, axis_u=axis_u, axis_v=axis_v, axis_w=axis_w, origin=origin):
            return (
                origin
                + uv[:, 0:1] * axis_u
                + uv[:, 1:2] * axis_v
                + w[:, None] * axis_w
            )

        for f in range(cs.prim_prof_start[k], cs.prim_prof_end[k]):
            perimeter, curve, area, interior = _profile_boundary(cs, f)

            def wall(rng, n, curve=curve, to_world=to_world, height=height,
                     axis_u=axis_u, axis_v=axis_v):
                uv, n2d = curve(rng, n)
                w = rng.uniform(0.0, height, n)
                normals = n2d[:, 0:1] * axis_u + n2d[:, 1:2] * axis_v
                return to_world(uv, w), normals

            faces.append(_Face(perimeter * height, wall))

            for w_level, sign in ((0.0, -1.0), (height, 1.0)):
                def cap(rng, n, interior=interior, to_world=to_world,
                        w_level=w_level, sign=sign, axis_w=axis_w):
                    uv = interior(rng, n)
                    w = np.full(n, w_level)
                    normals = np.tile(sign * axis_w, (n, 1))
                    return to_world(uv, w), normals

                faces.append(_Face(area, cap))
    return faces


def surface_sample(oracle: MembershipOracle, m: int, seed: int) -> PointCloud:
    """Up to ``m`` boundary points of the executed solid (fewer only when
    the attempt budget runs dry; zero survivors raise EmptyResultError)."""
    if m < 1:
        raise ValueError("m must be positive")
    if oracle.bbox.empty:
        raise EmptyResultError("solid is provably empty")
    if oracle._faces is None:
        oracle._faces = _build_faces(oracle.compiled)
    faces = oracle._faces
    areas = np.array([f.area for f in faces])
    probs = areas / areas.sum()
    eps = EPSILON_FACTOR * oracle.bbox.diagonal()

    rng = np.random.default_rng(seed)
    budget = ATTEMPT_FACTOR * m
    batch = min(budget, max(m, 512))
    kept: list[np.ndarray] = []
    n_kept = 0
    attempts = 0
    while attempts < budget and n_kept < m:
        n = min(batch, budget - attempts)
        attempts += n
        face_idx = rng.choice(len(faces), size=n, p=probs)
        pts = np.empty((n, 3))
        nrm = np.empty((n, 3))
        for fi in range(len(faces)):
            mask = face_idx == fi
            cnt = int(mask.sum())
            if cnt == 0:
                continue
            p, nv = faces[fi].generate(rng, cnt)
            pts[mask] = p
            nrm[mask] = nv
        outside = oracle.contains(pts + eps * nrm)
        inside = oracle.contains(pts - eps * nrm)
        ok = outside != inside
        if ok.any():
            kept.append(pts[ok])
            n_kept += int(ok.sum())
    if n_kept == 0:
        raise EmptyResultError("no boundary candidates survived the budget")
    out = np.concatenate(kept, axis=0)[:m]
    return PointCloud(out, Sampled(oracle.source_hash, int(seed)))
