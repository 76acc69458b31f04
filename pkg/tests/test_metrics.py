"""Chamfer distance, IoU and report aggregates."""
import numpy as np
import pytest

from cadforge import dsl
from cadforge.errors import (
    EmptyCloudError,
    EmptyListError,
    FrameMismatchError,
    NotNormalizedError,
)
from cadforge.geometry import Aabb, OccupancyGrid
from cadforge.metrics import (
    CdAggregate,
    LengthStats,
    aggregate_cd,
    chamfer,
    iou,
    length_stats,
)

from conftest import MINIMAL_TEXT
from oracles import brute_chamfer


def unit_cloud(rng, n):
    return rng.uniform(0.0, 1.0, (n, 3))


def test_chamfer_identical_is_zero():
    rng = np.random.default_rng(1)
    pts = unit_cloud(rng, 500)
    report = chamfer(pts, pts.copy())
    assert report.value == 0.0
    assert report.direction_ab == 0.0
    assert report.direction_ba == 0.0


def test_chamfer_two_points_exact():
    a = np.array([[0.4, 0.5, 0.5]])
    b = np.array([[0.5, 0.5, 0.5]])
    report = chamfer(a, b)
    # 0.1 apart, times the 1e3 report scale
    assert report.value == pytest.approx(100.0, abs=1e-9)
    assert report.direction_ab == pytest.approx(100.0, abs=1e-9)


def test_chamfer_matches_brute_force():
    for i in range(20):
        rng = np.random.default_rng(14_000 + i)
        a = unit_cloud(rng, 500)
        b = unit_cloud(rng, 311)
        report = chamfer(a, b)
        assert report.value == pytest.approx(brute_chamfer(a, b), abs=1e-9)


def test_chamfer_directions_are_asymmetric():
    rng = np.random.default_rng(2)
    a = unit_cloud(rng, 400)
    b = np.concatenate([a, np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])])
    report = chamfer(a, b)
    assert report.direction_ab == pytest.approx(0.0, abs=1e-12)
    assert report.direction_ba > 0.0
    assert report.value == pytest.approx(
        0.5 * (report.direction_ab + report.direction_ba)
    )


def test_chamfer_requires_normalized_points():
    rng = np.random.default_rng(3)
    inside = unit_cloud(rng, 10)
    outside = inside + 2.0
    with pytest.raises(NotNormalizedError):
        chamfer(outside, inside)
    with pytest.raises(NotNormalizedError):
        chamfer(inside, outside)


def test_chamfer_rejects_empty_cloud():
    rng = np.random.default_rng(4)
    with pytest.raises(EmptyCloudError):
        chamfer(np.zeros((0, 3)), unit_cloud(rng, 5))


def frame():
    return Aabb(np.zeros(3), np.ones(3))


def grid_from(bits):
    return OccupancyGrid(bits.shape[0], frame(), bits)


def test_iou_identical_and_disjoint():
    rng = np.random.default_rng(5)
    bits = rng.random((16, 16, 16)) < 0.4
    assert iou(grid_from(bits), grid_from(bits.copy())) == 1.0
    other = ~bits
    assert iou(grid_from(bits), grid_from(other)) == 0.0


def test_iou_half_shifted_box():
    res = 64
    idx = np.arange(res)
    a = np.zeros((res, res, res), bool)
    b = np.zeros((res, res, res), bool)
    a[idx < 32] = True          # slab x in [0, 0.5)
    b[(idx >= 16) & (idx < 48)] = True  # slab x in [0.25, 0.75)
    # overlap 0.25 over union 0.75
    assert iou(grid_from(a), grid_from(b)) == pytest.approx(1.0 / 3.0, abs=1.0 / res)


def test_iou_empty_grids_agree_perfectly():
    bits = np.zeros((8, 8, 8), bool)
    assert iou(grid_from(bits), grid_from(bits.copy())) == 1.0


def test_iou_frame_and_resolution_mismatch():
    bits = np.zeros((8, 8, 8), bool)
    a = OccupancyGrid(8, frame(), bits)
    shifted = OccupancyGrid(8, Aabb(np.ones(3), np.full(3, 2.0)), bits.copy())
    with pytest.raises(FrameMismatchError):
        iou(a, shifted)
    coarse = OccupancyGrid(4, frame(), np.zeros((4, 4, 4), bool))
    with pytest.raises(FrameMismatchError):
        iou(a, coarse)


def test_aggregate_single_value():
    agg = aggregate_cd([("t0", 7.5)])
    assert agg == CdAggregate(7.5, 7.5, 7.5)


def test_aggregate_hundred_values():
    values = [("t%03d" % i, float(i)) for i in range(1, 101)]
    agg = aggregate_cd(values)
    assert agg.best10_mean == pytest.approx(5.5)
    assert agg.mean == pytest.approx(50.5)
    assert agg.worst10_mean == pytest.approx(95.5)


def test_aggregate_short_list_uses_every_item():
    values = [("a", 1.0), ("b", 2.0), ("c", 6.0)]
    agg = aggregate_cd(values)
    assert agg.best10_mean == pytest.approx(3.0)
    assert agg.worst10_mean == pytest.approx(3.0)
    assert agg.mean == pytest.approx(3.0)


def test_aggregate_order_does_not_matter():
    rng = np.random.default_rng(6)
    values = [("t%d" % i, float(v)) for i, v in enumerate(rng.uniform(0, 50, 40))]
    shuffled = list(values)
    rng.shuffle(shuffled)
    assert aggregate_cd(values) == aggregate_cd(shuffled)


def test_aggregate_rejects_empty():
    with pytest.raises(EmptyListError):
        aggregate_cd([])


def test_length_stats():
    minimal = dsl.parse(MINIMAL_TEXT)
    bigger = dsl.parse(
        MINIMAL_TEXT.replace("result(e0)\n", "")
        + "w1=workspace(YZ,0,0,0)\n"
        + "s1=sketch(w1,rect(0,0,1,1))\n"
        + "e1=extrude(s1,1)\n"
        + "u0=union(e0,e1)\n"
        + "result(u0)\n"
    )
    n_small = dsl.count_tokens(minimal)
    n_big = dsl.count_tokens(bigger)
    stats = length_stats([minimal, bigger])
    assert stats == LengthStats((n_small + n_big) / 2.0, n_big, n_small)
    assert n_small == 39


def test_length_stats_rejects_empty():
    with pytest.raises(EmptyListError):
        length_stats([])
