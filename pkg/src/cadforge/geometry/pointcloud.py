"""Point clouds, unit-box normalization, and cloud file formats."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dsl import format_number
from ..errors import CadforgeError, DegenerateCloudError, EmptyCloudError

#: Slack allowed around [0, 1] when asserting a cloud is normalized.
UNIT_BOX_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Sampled:
    program_hash: str
    seed: int


@dataclass(frozen=True)
class Ingested:
    path: str


@dataclass(frozen=True)
class SyntheticTarget:
    seed: int


Provenance = Sampled | Ingested | SyntheticTarget


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (n, 3) float64
    provenance: Provenance

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def in_unit_box(points: np.ndarray) -> bool:
    if points.shape[0] == 0:
        return True
    lo = -UNIT_BOX_TOLERANCE
    hi = 1.0 + UNIT_BOX_TOLERANCE
    return bool(points.min() >= lo and points.max() <= hi)


def normalize_unit_box(pc: PointCloud) -> tuple[PointCloud, float, np.ndarray]:
    """Isotropically scale and translate so the longest axis spans exactly
    [0, 1] and the others are centered in it.

    Returns (cloud, scale, offset) with ``normalized = points * scale +
    offset``, so the transform inverts exactly.
    """
    if len(pc) == 0:
        raise EmptyCloudError("cannot normalize an empty cloud")
    lo = pc.points.min(axis=0)
    hi = pc.points.max(axis=0)
    extent = hi - lo
    largest = float(extent.max())
    if largest <= 0.0:
        raise DegenerateCloudError("all points coincide")
    scale = 1.0 / largest
    offset = -lo * scale + 0.5 * (1.0 - extent * scale)
    return PointCloud(pc.points * scale + offset, pc.provenance), scale, offset


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_xyz(path, pc: PointCloud) -> None:
    """One ``x y z`` line per point; numbers printed so they read back to
    exactly the same floats."""
    lines = [
        f"{format_number(p[0])} {format_number(p[1])} {format_number(p[2])}"
        for p in pc.points
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_xyz(path) -> PointCloud:
    rows = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CadforgeError(f"{path}: line {ln}: expected 3 numbers")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as e:
            raise CadforgeError(f"{path}: line {ln}: {e}") from e
    pts = np.asarray(rows, np.float64).reshape(-1, 3)
    return PointCloud(pts, Ingested(str(path)))


def read_ply(path) -> PointCloud:
    """ASCII vertex-only PLY reader; picks the x, y, z properties of the
    vertex element and ignores everything else."""
    text = Path(path).read_text().splitlines()
    it = iter(enumerate(text, start=1))

    def next_line():
        for _, raw in it:
            stripped = raw.strip()
            if stripped and not stripped.startswith("comment"):
                return stripped
        return None

    if next_line() != "ply":
        raise CadforgeError(f"{path}: missing 'ply' magic")
    fmt = next_line()
    if fmt is None or not fmt.startswith("format ascii"):
        raise CadforgeError(f"{path}: only ASCII PLY is supported")

    vertex_count = None
    prop_names: list[str] = []
    in_vertex = False
    while True:
        line = next_line()
        if line is None:
            raise CadforgeError(f"{path}: unterminated header")
        if line == "end_header":
            break
        fields = line.split()
        if fields[0] == "element":
            in_vertex = fields[1] == "vertex"
            if in_vertex:
                vertex_count = int(fields[2])
        elif fields[0] == "property" and in_vertex:
            prop_names.append(fields[-1])
    if vertex_count is None:
        raise CadforgeError(f"{path}: no vertex element")
    try:
        cols = [prop_names.index(n) for n in ("x", "y", "z")]
    except ValueError:
        raise CadforgeError(f"{path}: vertex element lacks x/y/z properties")

    rows = []
    for _ in range(vertex_count):
        line = next_line()
        if line is None:
            raise CadforgeError(f"{path}: fewer vertex rows than declared")
        parts = line.split()
        rows.append([float(parts[c]) for c in cols])
    pts = np.asarray(rows, np.float64).reshape(-1, 3)
    return PointCloud(pts, Ingested(str(path)))


def load_cloud(path) -> PointCloud:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return read_ply(path)
    return read_xyz(path)
