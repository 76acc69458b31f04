"""Self-training pipeline for sketch-extrude CAD program synthesis."""

from .dsl import (
    Program,
    canonicalize,
    count_tokens,
    parse,
    print_program,
    program_hash,
    validate,
    workspace_count,
)
from .errors import CadforgeError
from .geometry import (
    PointCloud,
    execute,
    normalize_unit_box,
    occupancy_grid,
    surface_sample,
)
from .metrics import ChamferReport, aggregate_cd, chamfer, iou, length_stats
from .augment import AugmentConfig, diversify, expand, shorten
from .proposer import (
    DecodingParams,
    MemoryBankProposer,
    PcfgProposer,
    Proposer,
    RemoteProposer,
)
from .selftrain import (
    IterationReport,
    PairSource,
    PipelineConfig,
    Target,
    TrainingPair,
    run,
    run_iteration,
    select_best,
)

__version__ = "0.1.0"
