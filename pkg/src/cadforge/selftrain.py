"""The iteration engine: propose, score, select, pair, update.

Each iteration proposes k candidates per target, scores every candidate
by chamfer distance between a fresh boundary sample of its execution and
the target cloud, keeps the winner under the tie rule (a near-tied but
strictly shorter program is preferred), turns winners into training
pairs under the configured policy, and hands the new pairs to the
proposer. Everything is a deterministic function of (config seed,
targets, initial proposer state); per-candidate seeds are derived from
labeled counters, never from call order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .augment import AugmentConfig, diversify
from .dsl import Program, count_tokens
from .errors import (
    BatchTooSmallError,
    CadforgeError,
    NoTargetsError,
    NoViableCandidateError,
    PolicyMismatchError,
)
from .geometry import (
    Aabb,
    MembershipOracle,
    PointCloud,
    execute,
    normalize_unit_box,
    occupancy_grid,
    surface_sample,
)
from .metrics import aggregate_cd, chamfer, iou, length_stats
from .proposer import DecodingParams, Proposer
from .seeds import derive_seed

IOU_RESOLUTION = 64
BATCH_KEEP_FRACTION = 0.2
MIN_BATCH_OUTCOMES = 5


class PairSource(Enum):
    OURS = "ours"
    BASELINE1 = "b1"
    BASELINE2 = "b2"
    BASELINE3 = "b3"


@dataclass(frozen=True)
class TrainingPair:
    shape: PointCloud           # normalized input X
    program: Program            # Z
    cd_to_target: float | None  # scaled chamfer vs the original target, when scored
    source: PairSource
    iteration: int


@dataclass(frozen=True)
class Target:
    id: str
    cloud: PointCloud  # normalized
    oracle: MembershipOracle | None = None
    # (scale, offset) mapping the oracle's model space onto the cloud's
    # normalized space; identity when the cloud was born normalized.
    transform: tuple[float, np.ndarray] | None = None


@dataclass
class SelectionOutcome:
    target_id: str
    best: Program
    best_cd: float
    all_cds: list[tuple[Program, float]]
    rejected_count: int
    best_oracle: MembershipOracle
    best_sample: PointCloud  # normalized scoring sample of the winner
    best_transform: tuple[float, np.ndarray]


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    cd_best10: float
    cd_mean: float
    cd_worst10: float
    iou_mean: float | None
    len_mean: float
    len_max: int
    len_min: int
    pairs_emitted: int
    proposals_dropped: int


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 10
    tie_tolerance: float = 1e-4
    iterations: int = 6
    sample_points: int = 2048
    decoding: DecodingParams = field(default_factory=DecodingParams)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    policy: PairSource = PairSource.OURS
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.tie_tolerance <= 0:
            raise ValueError("tie_tolerance must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.sample_points < 1:
            raise ValueError("sample_points must be positive")


@dataclass
class PipelineState:
    proposer: Proposer
    dataset: list[TrainingPair] = field(default_factory=list)
    iteration: int = 0


def pick_winner(cds, token_counts, tie_tolerance: float) -> int:
    """Index of the winning candidate. Minimum cd wins, except that any
    candidate whose cd is within tie_tolerance of the minimum and whose
    token count is strictly smaller displaces it; among those, fewest
    tokens first, then candidate order."""
    cds = list(cds)
    token_counts = list(token_counts)
    w0 = int(np.argmin(cds))
    floor = cds[w0]
    shorter = [
        i for i in range(len(cds))
        if cds[i] - floor < tie_tolerance and token_counts[i] < token_counts[w0]
    ]
    if not shorter:
        return w0
    return min(shorter, key=lambda i: (token_counts[i], i))


def select_best(
    candidates: list[Program],
    target: PointCloud,
    cfg: PipelineConfig,
    target_id: str = "",
    iteration: int = 0,
    target_index: int = 0,
) -> SelectionOutcome:
    """Execute, sample, and score each candidate against the normalized
    target; apply the tie rule. Candidates that fail to execute are
    excluded and counted."""
    scored = []
    rejected = 0
    for c_idx, program in enumerate(candidates):
        seed = derive_seed(cfg.seed, "score", iteration, target_index, c_idx)
        try:
            oracle = execute(program)
            sample = surface_sample(oracle, cfg.sample_points, seed)
            normalized, scale, offset = normalize_unit_box(sample)
        except CadforgeError:
            rejected += 1
            continue
        cd = chamfer(normalized, target).value
        scored.append((program, cd, oracle, normalized, (scale, offset)))
    if not scored:
        raise NoViableCandidateError(
            "all %d candidates failed execution for target %r"
            % (len(candidates), target_id)
        )
    idx = pick_winner(
        [s[1] for s in scored],
        [count_tokens(s[0]) for s in scored],
        cfg.tie_tolerance,
    )
    best, best_cd, oracle, sample, transform = scored[idx]
    return SelectionOutcome(
        target_id=target_id,
        best=best,
        best_cd=best_cd,
        all_cds=[(s[0], s[1]) for s in scored],
        rejected_count=rejected,
        best_oracle=oracle,
        best_sample=sample,
        best_transform=transform,
    )


def build_pairs(
    policy: PairSource,
    outcome: SelectionOutcome,
    target: PointCloud,
    cfg: PipelineConfig,
    seed: int,
    iteration: int = 0,
) -> list[TrainingPair]:
    if policy is PairSource.BASELINE3:
        raise PolicyMismatchError("baseline3 builds pairs batch-wise")
    if policy is PairSource.BASELINE1:
        return [TrainingPair(outcome.best_sample, outcome.best, outcome.best_cd,
                             policy, iteration)]
    if policy is PairSource.BASELINE2:
        return [TrainingPair(target, outcome.best, outcome.best_cd, policy, iteration)]

    pairs: list[TrainingPair] = []
    for i, (program, cloud) in enumerate(
        diversify(outcome.best, cfg.augment, seed, cfg.sample_points)
    ):
        normalized, _, _ = normalize_unit_box(cloud)
        cd = outcome.best_cd if i == 0 else None  # variants are unscored
        pairs.append(TrainingPair(normalized, program, cd, policy, iteration))
    return pairs


def build_pairs_batch(
    policy: PairSource,
    outcomes: list[SelectionOutcome],
    targets: list[Target],
    cfg: PipelineConfig,
    iteration: int = 0,
) -> list[TrainingPair]:
    """Keep the top ceil(0.2 n) outcomes by cd and emit target-paired
    (Baseline2-style) pairs for those only."""
    if policy is not PairSource.BASELINE3:
        raise PolicyMismatchError("batch pair building is a baseline3 behavior")
    if len(outcomes) < MIN_BATCH_OUTCOMES:
        raise BatchTooSmallError(
            "need at least %d outcomes, got %d" % (MIN_BATCH_OUTCOMES, len(outcomes))
        )
    order = sorted(range(len(outcomes)), key=lambda i: (outcomes[i].best_cd, i))
    keep = math.ceil(BATCH_KEEP_FRACTION * len(outcomes))
    return [
        TrainingPair(targets[i].cloud, outcomes[i].best, outcomes[i].best_cd,
                     policy, iteration)
        for i in order[:keep]
    ]


def _as_target(obj, index: int) -> Target:
    if isinstance(obj, Target):
        return obj
    return Target(id="t%04d" % index, cloud=obj)


def _transformed_bbox(oracle: MembershipOracle, transform) -> Aabb:
    scale, offset = transform
    box = oracle.bbox
    return Aabb(box.lo * scale + offset, box.hi * scale + offset, box.empty)


_IDENTITY = (1.0, np.zeros(3))


def _winner_iou(target: Target, outcome: SelectionOutcome) -> float:
    t_tf = target.transform if target.transform is not None else _IDENTITY
    w_tf = outcome.best_transform
    frame = _transformed_bbox(target.oracle, t_tf).join(
        _transformed_bbox(outcome.best_oracle, w_tf)
    )
    grid_t = occupancy_grid(target.oracle, IOU_RESOLUTION, frame=frame, transform=t_tf)
    grid_w = occupancy_grid(outcome.best_oracle, IOU_RESOLUTION, frame=frame, transform=w_tf)
    return iou(grid_t, grid_w)


def run_iteration(
    state: PipelineState,
    targets,
    cfg: PipelineConfig,
    threads: int = 1,
):
    """One full pass over the targets. Per-target failures (no viable
    candidate) drop the target from this iteration's statistics and are
    folded into proposals_dropped rather than raised."""
    targets = [_as_target(t, i) for i, t in enumerate(targets)]
    if not targets:
        raise NoTargetsError("run_iteration needs at least one target")
    it = state.iteration
    shapes = [t.cloud for t in targets]
    seeds = [derive_seed(cfg.seed, "propose", it, i) for i in range(len(targets))]

    try:
        candidate_lists = state.proposer.propose_batch(shapes, cfg.k, cfg.decoding, seeds)
    except CadforgeError:
        candidate_lists = []
        for shape, seed in zip(shapes, seeds):
            try:
                candidate_lists.append(state.proposer.propose(shape, cfg.k, cfg.decoding, seed))
            except CadforgeError:
                candidate_lists.append([])

    def score(i: int) -> SelectionOutcome | None:
        try:
            return select_best(
                candidate_lists[i], targets[i].cloud, cfg,
                target_id=targets[i].id, iteration=it, target_index=i,
            )
        except NoViableCandidateError:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(score, range(len(targets))))
    else:
        outcomes = [score(i) for i in range(len(targets))]

    dropped = 0
    for i, outcome in enumerate(outcomes):
        dropped += cfg.k - len(candidate_lists[i])
        dropped += outcome.rejected_count if outcome is not None else len(candidate_lists[i])

    kept = [(i, o) for i, o in enumerate(outcomes) if o is not None]
    if not kept:
        raise NoViableCandidateError("every target failed this iteration")

    if cfg.policy is PairSource.BASELINE3:
        try:
            pairs = build_pairs_batch(
                cfg.policy,
                [o for _, o in kept],
                [targets[i] for i, _ in kept],
                cfg,
                iteration=it,
            )
        except BatchTooSmallError:
            pairs = []  # too few survivors to rank; emit nothing this round
    else:
        pairs = []
        for i, outcome in kept:
            pairs.extend(build_pairs(
                cfg.policy, outcome, targets[i].cloud, cfg,
                seed=derive_seed(cfg.seed, "pairs", it, i), iteration=it,
            ))

    state.dataset.extend(pairs)
    state.proposer.update(pairs)

    agg = aggregate_cd([(o.target_id, o.best_cd) for _, o in kept])
    ious = [
        _winner_iou(targets[i], o) for i, o in kept if targets[i].oracle is not None
    ]
    lengths = length_stats([o.best for _, o in kept])
    report = IterationReport(
        iteration=it,
        cd_best10=agg.best10_mean,
        cd_mean=agg.mean,
        cd_worst10=agg.worst10_mean,
        iou_mean=float(np.mean(ious)) if ious else None,
        len_mean=lengths.mean,
        len_max=lengths.max,
        len_min=lengths.min,
        pairs_emitted=len(pairs),
        proposals_dropped=dropped,
    )
    state.iteration = it + 1
    return state, report


def run(
    cfg: PipelineConfig,
    targets,
    proposer: Proposer,
    sink=None,
    start_iteration: int = 0,
    dataset: list[TrainingPair] | None = None,
    threads: int = 1,
) -> list[IterationReport]:
    """Sequential iterations from start_iteration to cfg.iterations. The
    optional sink receives (report, new_pairs, state) after every
    iteration, which is what makes a crashed run resumable."""
    state = PipelineState(proposer, list(dataset) if dataset else [], start_iteration)
    reports: list[IterationReport] = []
    for _ in range(start_iteration, cfg.iterations):
        before = len(state.dataset)
        state, report = run_iteration(state, targets, cfg, threads=threads)
        reports.append(report)
        if sink is not None:
            sink.on_iteration(report, state.dataset[before:], state)
    return reports
