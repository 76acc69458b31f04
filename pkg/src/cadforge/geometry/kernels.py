"""Point-membership kernels.

Two interchangeable backends evaluate a CompiledSolid over a point batch:
a numba-jitted per-point loop (default) and a vectorized pure-numpy walk.
Both apply the same arithmetic — squared-distance circle test, half-width
rect test, even-odd ray crossing for polygons, inclusive slab test along
the extrude axis — so their outputs agree bit for bit.

Select with the CADFORGE_BACKEND environment variable ("numba" or
"numpy") before import, or at runtime via set_backend(). When numba is
not importable the numpy path is chosen automatically.
"""
from __future__ import annotations

import os
import warnings

import numpy as np

BACKEND_ENV = "CADFORGE_BACKEND"


def _membership_numpy(
    points,
    prim_plane, prim_origin, prim_height,
    prim_prof_start, prim_prof_end,
    prof_kind, prof_params,
    prof_poly_start, prof_poly_end, poly_verts,
    instr_op, instr_a, instr_b,
):
    x = points[:, 0]
    y = points[:, 1]
    z = points[:, 2]
    n_instr = instr_op.shape[0]
    vals: list[np.ndarray] = [None] * n_instr  # type: ignore[list-item]
    for s in range(n_instr):
        op = instr_op[s]
        if op == 0:
            k = instr_a[s]
            ox, oy, oz = prim_origin[k]
            plane = prim_plane[k]
            if plane == 0:
                u = x - ox
                v = y - oy
                w = z - oz
            elif plane == 1:
                u = y - oy
                v = z - oz
                w = x - ox
            else:
                u = z - oz
                v = x - ox
                w = y - oy
            hits = np.zeros(len(points), np.int64)
            for f in range(prim_prof_start[k], prim_prof_end[k]):
                kind = prof_kind[f]
                if kind == 0:
                    du = u - prof_params[f, 0]
                    dv = v - prof_params[f, 1]
                    r = prof_params[f, 2]
                    inside = du * du + dv * dv <= r * r
                elif kind == 1:
                    du = u - prof_params[f, 0]
                    dv = v - prof_params[f, 1]
                    hw = prof_params[f, 2] * 0.5
                    hh = prof_params[f, 3] * 0.5
                    inside = (du >= -hw) & (du <= hw) & (dv >= -hh) & (dv <= hh)
                else:
                    j0 = prof_poly_start[f]
                    j1 = prof_poly_end[f]
                    inside = np.zeros(len(points), np.bool_)
                    xb = poly_verts[j1 - 1, 0]
                    yb = poly_verts[j1 - 1, 1]
                    for j in range(j0, j1):
                        xa = poly_verts[j, 0]
                        ya = poly_verts[j, 1]
                        cond = (ya > v) != (yb > v)
                        with np.errstate(divide="ignore", invalid="ignore"):
                            t = (v - ya) / (yb - ya)
                            crossing = cond & (u < xa + t * (xb - xa))
                        inside ^= crossing
                        xb = xa
                        yb = ya
                hits += inside
            vals[s] = ((hits & 1) == 1) & (w >= 0.0) & (w <= prim_height[k])
        elif op == 1:
            vals[s] = vals[instr_a[s]] | vals[instr_b[s]]
        elif op == 2:
            vals[s] = vals[instr_a[s]] & vals[instr_b[s]]
        else:
            vals[s] = vals[instr_a[s]] & ~vals[instr_b[s]]
    return vals[n_instr - 1]


def _build_numba():
    from numba import njit

    @njit(cache=True, nogil=True)
    def kernel(
        points,
        prim_plane, prim_origin, prim_height,
        prim_prof_start, prim_prof_end,
        prof_kind, prof_params,
        prof_poly_start, prof_poly_end, poly_verts,
        instr_op, instr_a, instr_b,
        out,
    ):
        n = points.shape[0]
        n_instr = instr_op.shape[0]
        vals = np.empty(n_instr, np.bool_)
        for i in range(n):
            x = points[i, 0]
            y = points[i, 1]
            z = points[i, 2]
            for s in range(n_instr):
                op = instr_op[s]
                if op == 0:
                    k = instr_a[s]
                    ox = prim_origin[k, 0]
                    oy = prim_origin[k, 1]
                    oz = prim_origin[k, 2]
                    plane = prim_plane[k]
                    if plane == 0:
                        u = x - ox
                        v = y - oy
                        w = z - oz
                    elif plane == 1:
                        u = y - oy
                        v = z - oz
                        w = x - ox
                    else:
                        u = z - oz
                        v = x - ox
                        w = y - oy
                    inside = False
                    if w >= 0.0 and w <= prim_height[k]:
                        hits = 0
                        for f in range(prim_prof_start[k], prim_prof_end[k]):
                            kind = prof_kind[f]
                            if kind == 0:
                                du = u - prof_params[f, 0]
                                dv = v - prof_params[f, 1]
                                r = prof_params[f, 2]
                                if du * du + dv * dv <= r * r:
                                    hits += 1
                            elif kind == 1:
                                du = u - prof_params[f, 0]
                                dv = v - prof_params[f, 1]
                                hw = prof_params[f, 2] * 0.5
                                hh = prof_params[f, 3] * 0.5
                                if du >= -hw and du <= hw and dv >= -hh and dv <= hh:
                                    hits += 1
                            else:
                                j0 = prof_poly_start[f]
                                j1 = prof_poly_end[f]
                                gin = False
                                xb = poly_verts[j1 - 1, 0]
                                yb = poly_verts[j1 - 1, 1]
                                for j in range(j0, j1):
                                    xa = poly_verts[j, 0]
                                    ya = poly_verts[j, 1]
                                    if (ya > v) != (yb > v):
                                        t = (v - ya) / (yb - ya)
                                        if u < xa + t * (xb - xa):
                                            gin = not gin
                                    xb = xa
                                    yb = ya
                                if gin:
                                    hits += 1
                        inside = (hits & 1) == 1
                    vals[s] = inside
                elif op == 1:
                    vals[s] = vals[instr_a[s]] or vals[instr_b[s]]
                elif op == 2:
                    vals[s] = vals[instr_a[s]] and vals[instr_b[s]]
                else:
                    vals[s] = vals[instr_a[s]] and not vals[instr_b[s]]
            out[i] = vals[n_instr - 1]

    def run(points, *tables):
        out = np.empty(points.shape[0], np.bool_)
        kernel(points, *tables, out)
        return out

    return run


_active_name: str | None = None
_active_impl = None


def set_backend(name: str) -> None:
    """Switch membership evaluation to "numba" or "numpy"."""
    global _active_name, _active_impl
    if name == "numpy":
        _active_name, _active_impl = "numpy", _membership_numpy
    elif name == "numba":
        _active_name, _active_impl = "numba", _build_numba()
    else:
        raise ValueError(f"unknown backend {name!r} (use 'numba' or 'numpy')")


def active_backend() -> str:
    return _active_name or "unset"


def _init_backend():
    requested = os.environ.get(BACKEND_ENV, "").strip().lower()
    if requested == "numpy":
        set_backend("numpy")
        return
    if requested in ("", "numba"):
        try:
            set_backend("numba")
            return
        except ImportError:
            if requested == "numba":
                raise
            warnings.warn("numba unavailable; using the numpy membership backend")
            set_backend("numpy")
            return
    raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {requested!r}")


_init_backend()


def eval_membership(solid, points: np.ndarray) -> np.ndarray:
    """Boolean membership of each point in the compiled solid."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    if pts.shape[0] == 0:
        return np.zeros(0, np.bool_)
    return _active_impl(pts, *solid.tables())
