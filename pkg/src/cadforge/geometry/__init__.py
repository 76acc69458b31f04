from .compiled import PLANE_AXES, CompiledSolid, compile_program
from .kernels import active_backend, eval_membership, set_backend
from .oracle import (
    EMPTY_AABB,
    Aabb,
    MembershipOracle,
    OccupancyGrid,
    execute,
    load_grid,
    occupancy_grid,
    save_grid,
)
from .pointcloud import (
    Ingested,
    PointCloud,
    Sampled,
    SyntheticTarget,
    in_unit_box,
    load_cloud,
    normalize_unit_box,
    read_ply,
    read_xyz,
    write_xyz,
)
from .sampling import surface_sample

__all__ = [
    "Aabb",
    "CompiledSolid",
    "EMPTY_AABB",
    "Ingested",
    "MembershipOracle",
    "OccupancyGrid",
    "PLANE_AXES",
    "PointCloud",
    "Sampled",
    "SyntheticTarget",
    "active_backend",
    "compile_program",
    "eval_membership",
    "execute",
    "in_unit_box",
    "load_cloud",
    "load_grid",
    "normalize_unit_box",
    "occupancy_grid",
    "read_ply",
    "read_xyz",
    "save_grid",
    "set_backend",
    "surface_sample",
    "write_xyz",
]
