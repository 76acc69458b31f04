"""Distances and summary statistics between shapes.

Chamfer distance is the workhorse: mean nearest-neighbour distance in
each direction, averaged, reported times 1e3. Both clouds must already
sit inside the unit box; the scale factor makes typical values land in
single digits instead of milli-units. Nearest neighbours go through a
KD-tree; a brute-force twin lives in the test suite to pin exactness.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .dsl import Program, count_tokens
from .errors import (
    EmptyCloudError,
    EmptyListError,
    FrameMismatchError,
    NotNormalizedError,
)
from .geometry.oracle import OccupancyGrid
from .geometry.pointcloud import UNIT_BOX_TOLERANCE, PointCloud, in_unit_box

CD_SCALE = 1e3
TAIL_SIZE = 10


@dataclass(frozen=True)
class ChamferReport:
    value: float          # scaled, symmetric
    direction_ab: float   # scaled directional means
    direction_ba: float


class NnIndex:
    """Exact nearest-neighbour index over one cloud."""

    def __init__(self, points: np.ndarray):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise EmptyCloudError("index needs a non-empty (n, 3) array")
        self._tree = cKDTree(pts)

    def distances(self, queries: np.ndarray) -> np.ndarray:
        d, _ = self._tree.query(np.ascontiguousarray(queries, dtype=np.float64))
        return np.atleast_1d(d)


def _points(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise EmptyCloudError("expected an (n, 3) array")
    if len(pts) == 0:
        raise EmptyCloudError("point cloud is empty")
    if not in_unit_box(pts):
        raise NotNormalizedError(
            "points must lie within the unit box (tolerance %g); normalize first"
            % UNIT_BOX_TOLERANCE
        )
    return pts


def chamfer(a, b) -> ChamferReport:
    pa, pb = _points(a), _points(b)
    direction_ab = float(NnIndex(pb).distances(pa).mean()) * CD_SCALE
    direction_ba = float(NnIndex(pa).distances(pb).mean()) * CD_SCALE
    return ChamferReport(0.5 * (direction_ab + direction_ba), direction_ab, direction_ba)


def iou(a: OccupancyGrid, b: OccupancyGrid) -> float:
    if a.resolution != b.resolution:
        raise FrameMismatchError(
            "grid resolutions differ: %d vs %d" % (a.resolution, b.resolution)
        )
    fa, fb = a.frame, b.frame
    same = fa.empty == fb.empty and (
        fa.empty
        or (np.allclose(fa.lo, fb.lo, rtol=0.0, atol=1e-12)
            and np.allclose(fa.hi, fb.hi, rtol=0.0, atol=1e-12))
    )
    if not same:
        raise FrameMismatchError("grids cover different regions of space")
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0  # two empty grids agree perfectly
    return float(np.count_nonzero(a.bits & b.bits)) / union


class CdAggregate(NamedTuple):
    best10_mean: float
    mean: float
    worst10_mean: float


def aggregate_cd(values) -> CdAggregate:
    """Summary of (shape_id, cd) pairs: mean of the 10 smallest, overall
    mean, mean of the 10 largest. Fewer than 10 values collapse the tail
    slices onto the whole list."""
    cds = np.sort(np.asarray([float(cd) for _, cd in values], dtype=np.float64))
    if len(cds) == 0:
        raise EmptyListError("no chamfer values to aggregate")
    k = min(TAIL_SIZE, len(cds))
    return CdAggregate(
        best10_mean=float(cds[:k].mean()),
        mean=float(cds.mean()),
        worst10_mean=float(cds[-k:].mean()),
    )


class LengthStats(NamedTuple):
    mean: float
    max: int
    min: int


def length_stats(programs: list[Program]) -> LengthStats:
    counts = [count_tokens(p) for p in programs]
    if not counts:
        raise EmptyListError("no programs to summarize")
    return LengthStats(
        mean=float(np.mean(counts)),
        max=int(max(counts)),
        min=int(min(counts)),
    )
