"""Weighted grammar over the modeling language.

Programs are derived top-down as a chain: one base feature (sketch plus
extrude on an initial workspace), then a loop that keeps adding features —
each placed on an existing workspace or a freshly spawned one — and folds
every new solid into the running result with a boolean operation.

Every branch point is a weighted categorical choice decoded under
DecodingParams. Numeric literals are drawn by first choosing one of 16
fixed bins for the value's family, then jittering uniformly inside the
bin. The jitter span scales with min(temperature, 1) so the greedy limit
produces a single deterministic program (bin midpoints everywhere).

The reverse direction, ``derivation_counts``, recovers the choice counts
from any valid program — not only chain-shaped ones — so grammar weights
can be re-estimated from selected programs (``pcfg_update``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dsl import (
    BOOLEAN_OPS,
    PLANES,
    BooleanDef,
    Circle,
    ExtrudeDef,
    Polygon,
    Program,
    Rect,
    SketchDef,
    Statement,
    WorkspaceDef,
    canonicalize,
    count_tokens,
    validate,
)
from ..errors import BudgetExhaustedError, ProgramSemanticError
from ..seeds import derive_rng
from .params import DecodingParams, decode_choice

N_BINS = 16

#: Value families and their bin spans. Bin lower edges start high enough
#: that any drawn dimension clears the 1e-2 minimum feature size.
BIN_RANGES: dict[str, tuple[float, float]] = {
    "coord": (-0.8, 0.8),
    "radius": (0.05, 0.6),
    "size": (0.08, 1.2),
    "height": (0.08, 1.2),
    "poly_radius": (0.08, 0.7),
    "origin": (-0.9, 0.9),
}

#: Categorical rule families and their arities. Two-way rules order their
#: outcomes (stop, continue) and (existing, new).
CATEGORY_SIZES: dict[str, int] = {
    "profile_kind": 3,     # circle, rect, polygon
    "boolean_op": 3,       # union, cut, intersect
    "continue_feature": 2,
    "placement": 2,
    "plane": 3,
    "extra_profile": 2,
    "n_vertices": 6,       # 3 .. 8
    **{f"bin_{fam}": N_BINS for fam in BIN_RANGES},
}

MAX_FEATURES = 6
MAX_PROFILES = 3
_RETRY_BUDGET = 50


@dataclass
class GrammarWeights:
    """Positive weight vector per rule family."""

    weights: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.weights:
            self.weights = {
                name: np.ones(size) for name, size in CATEGORY_SIZES.items()
            }
        if set(self.weights) != set(CATEGORY_SIZES):
            raise ValueError("weight table must cover every rule family")
        for name, arr in self.weights.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != (CATEGORY_SIZES[name],):
                raise ValueError(f"bad arity for {name}")
            if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"weights for {name} must be positive")
            self.weights[name] = arr

    def copy(self) -> "GrammarWeights":
        return GrammarWeights({k: v.copy() for k, v in self.weights.items()})


def default_weights() -> GrammarWeights:
    """Proposer starting point: biased toward short, circle/rect programs."""
    w = {name: np.ones(size) for name, size in CATEGORY_SIZES.items()}
    w["profile_kind"] = np.array([1.2, 1.2, 0.6])
    w["boolean_op"] = np.array([1.5, 1.0, 0.5])
    w["continue_feature"] = np.array([2.0, 1.0])
    w["placement"] = np.array([1.5, 1.0])
    w["extra_profile"] = np.array([3.0, 1.0])
    return GrammarWeights(w)


def hidden_weights() -> GrammarWeights:
    """Generator used for synthetic targets; deliberately skewed away from
    the proposer defaults so targets are not free to reach."""
    w = {name: np.ones(size) for name, size in CATEGORY_SIZES.items()}
    w["profile_kind"] = np.array([2.0, 2.5, 1.0])
    w["boolean_op"] = np.array([3.0, 1.6, 0.4])
    w["continue_feature"] = np.array([1.0, 1.1])
    w["placement"] = np.array([2.0, 1.2])
    w["plane"] = np.array([2.0, 1.0, 1.0])
    w["extra_profile"] = np.array([2.5, 1.0])
    w["n_vertices"] = np.array([1.0, 2.0, 2.0, 1.5, 1.0, 0.5])
    centers = np.arange(N_BINS)
    w["bin_coord"] = 0.4 + np.exp(-((centers - 7.5) / 4.0) ** 2)
    w["bin_radius"] = np.linspace(2.0, 0.5, N_BINS)
    w["bin_size"] = np.linspace(0.5, 2.0, N_BINS)
    w["bin_height"] = 0.4 + np.exp(-((centers - 5.0) / 3.0) ** 2)
    w["bin_poly_radius"] = np.linspace(1.8, 0.6, N_BINS)
    w["bin_origin"] = 0.3 + np.exp(-((centers - 7.5) / 3.0) ** 2)
    return GrammarWeights(w)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _jitter_fraction(params: DecodingParams) -> float:
    return min(max(params.temperature, 0.0), 1.0)


def sample_value(
    gw: GrammarWeights, family: str, params: DecodingParams, rng: np.random.Generator
) -> float:
    """Draw a literal: weighted bin choice, then uniform jitter in the bin."""
    lo, hi = BIN_RANGES[family]
    width = (hi - lo) / N_BINS
    idx = decode_choice(gw.weights[f"bin_{family}"], params, rng)
    u = rng.uniform()
    return lo + width * (idx + 0.5 + (u - 0.5) * _jitter_fraction(params))


def sample_profile(
    gw: GrammarWeights, params: DecodingParams, rng: np.random.Generator
):
    kind = decode_choice(gw.weights["profile_kind"], params, rng)
    if kind == 0:
        return Circle(
            sample_value(gw, "coord", params, rng),
            sample_value(gw, "coord", params, rng),
            sample_value(gw, "radius", params, rng),
        )
    if kind == 1:
        return Rect(
            sample_value(gw, "coord", params, rng),
            sample_value(gw, "coord", params, rng),
            sample_value(gw, "size", params, rng),
            sample_value(gw, "size", params, rng),
        )
    n = 3 + decode_choice(gw.weights["n_vertices"], params, rng)
    cx = sample_value(gw, "coord", params, rng)
    cy = sample_value(gw, "coord", params, rng)
    radius = sample_value(gw, "poly_radius", params, rng)
    rot = rng.uniform(0.0, 2.0 * math.pi / n) * _jitter_fraction(params)
    verts = tuple(
        (
            cx + radius * math.cos(rot + 2.0 * math.pi * i / n),
            cy + radius * math.sin(rot + 2.0 * math.pi * i / n),
        )
        for i in range(n)
    )
    return Polygon(verts)


def sample_profile_list(
    gw: GrammarWeights, params: DecodingParams, rng: np.random.Generator
):
    profiles = [sample_profile(gw, params, rng)]
    while (
        len(profiles) < MAX_PROFILES
        and decode_choice(gw.weights["extra_profile"], params, rng) == 1
    ):
        profiles.append(sample_profile(gw, params, rng))
    return tuple(profiles)


def sample_program(
    gw: GrammarWeights,
    params: DecodingParams,
    rng: np.random.Generator,
    max_features: int = MAX_FEATURES,
) -> Program:
    """One full top-down derivation (token budget not enforced here)."""
    statements: list[Statement] = []
    counters = {"w": 0, "s": 0, "b": 0}

    def fresh(prefix: str) -> str:
        name = f"{prefix}{counters[prefix]}"
        counters[prefix] += 1
        return name

    def new_workspace() -> str:
        plane = PLANES[decode_choice(gw.weights["plane"], params, rng)]
        origin = (
            sample_value(gw, "origin", params, rng),
            sample_value(gw, "origin", params, rng),
            sample_value(gw, "origin", params, rng),
        )
        wid = fresh("w")
        statements.append(Statement(wid, WorkspaceDef(plane, origin)))
        return wid

    def new_feature(wid: str) -> str:
        sid = fresh("s")
        statements.append(Statement(sid, SketchDef(wid, sample_profile_list(gw, params, rng))))
        bid = fresh("b")
        statements.append(Statement(bid, ExtrudeDef(sid, sample_value(gw, "height", params, rng))))
        return bid

    workspaces = [new_workspace()]
    current = new_feature(workspaces[0])
    features = 1
    while (
        features < max_features
        and decode_choice(gw.weights["continue_feature"], params, rng) == 1
    ):
        if decode_choice(gw.weights["placement"], params, rng) == 1:
            wid = new_workspace()
            workspaces.append(wid)
        else:
            wid = workspaces[int(rng.integers(len(workspaces)))]
        solid = new_feature(wid)
        op = BOOLEAN_OPS[decode_choice(gw.weights["boolean_op"], params, rng)]
        bid = fresh("b")
        statements.append(Statement(bid, BooleanDef(op, current, solid)))
        current = bid
        features += 1
    return Program(tuple(statements), current)


def pcfg_propose(
    gw: GrammarWeights,
    k: int,
    params: DecodingParams,
    seed: int,
    max_features: int = MAX_FEATURES,
) -> list[Program]:
    """k independent derivations under the decoding params. A derivation
    that busts the token budget or fails validation is redrawn; fifty
    failures for one slot raise BudgetExhaustedError."""
    out = []
    for i in range(k):
        for attempt in range(_RETRY_BUDGET):
            rng = derive_rng(seed, i, attempt)
            program = sample_program(gw, params, rng, max_features)
            if count_tokens(program) > params.max_tokens:
                continue
            try:
                validate(program)
            except ProgramSemanticError:
                continue
            out.append(program)
            break
        else:
            raise BudgetExhaustedError(
                f"no valid derivation for slot {i} in {_RETRY_BUDGET} attempts"
            )
    return out


# ---------------------------------------------------------------------------
# Count recovery and re-estimation
# ---------------------------------------------------------------------------

def bin_index(family: str, value: float) -> int:
    lo, hi = BIN_RANGES[family]
    width = (hi - lo) / N_BINS
    return int(np.clip(math.floor((value - lo) / width), 0, N_BINS - 1))


def derivation_counts(program: Program) -> dict[str, np.ndarray]:
    """Choice counts implied by a valid program.

    Works on arbitrary boolean shapes, not only generator chains: profile
    and literal choices are read off each statement, placement is 'new'
    for a feature whose workspace no earlier feature used, and the
    feature loop contributes one stop plus one continue per extra feature.
    """
    counts = {name: np.zeros(size) for name, size in CATEGORY_SIZES.items()}
    canon = canonicalize(program)
    by_id = {st.id: st for st in canon.statements}

    features = [st for st in canon.statements if isinstance(st.body, ExtrudeDef)]
    counts["continue_feature"][0] += 1
    counts["continue_feature"][1] += max(len(features) - 1, 0)

    seen_ws: set[str] = set()
    for fi, st in enumerate(features):
        sketch = by_id[st.body.sketch_id].body
        wid = sketch.workspace_id
        if fi > 0:
            counts["placement"][1 if wid not in seen_ws else 0] += 1
        seen_ws.add(wid)
        counts["bin_height"][bin_index("height", st.body.height)] += 1
        counts["extra_profile"][0] += 1
        counts["extra_profile"][1] += len(sketch.profiles) - 1
        for prof in sketch.profiles:
            if isinstance(prof, Circle):
                counts["profile_kind"][0] += 1
                counts["bin_coord"][bin_index("coord", prof.cx)] += 1
                counts["bin_coord"][bin_index("coord", prof.cy)] += 1
                counts["bin_radius"][bin_index("radius", prof.r)] += 1
            elif isinstance(prof, Rect):
                counts["profile_kind"][1] += 1
                counts["bin_coord"][bin_index("coord", prof.cx)] += 1
                counts["bin_coord"][bin_index("coord", prof.cy)] += 1
                counts["bin_size"][bin_index("size", prof.w)] += 1
                counts["bin_size"][bin_index("size", prof.h)] += 1
            else:
                counts["profile_kind"][2] += 1
                n = len(prof.vertices)
                counts["n_vertices"][int(np.clip(n - 3, 0, 5))] += 1
                cx = sum(x for x, _ in prof.vertices) / n
                cy = sum(y for _, y in prof.vertices) / n
                counts["bin_coord"][bin_index("coord", cx)] += 1
                counts["bin_coord"][bin_index("coord", cy)] += 1
                mean_r = sum(
                    math.hypot(x - cx, y - cy) for x, y in prof.vertices
                ) / n
                counts["bin_poly_radius"][bin_index("poly_radius", mean_r)] += 1

    for st in canon.statements:
        if isinstance(st.body, WorkspaceDef):
            counts["plane"][PLANES.index(st.body.plane)] += 1
            for v in st.body.origin:
                counts["bin_origin"][bin_index("origin", v)] += 1
        elif isinstance(st.body, BooleanDef):
            counts["boolean_op"][BOOLEAN_OPS.index(st.body.op)] += 1
    return counts


def pcfg_update(gw: GrammarWeights, pairs) -> GrammarWeights:
    """Re-estimate weights from selected programs.

    New weights are add-one-smoothed choice counts over the pair programs;
    an empty pair list returns the input unchanged. ``pairs`` only needs a
    ``.program`` attribute per element.
    """
    pairs = list(pairs)
    if not pairs:
        return gw
    totals = {name: np.zeros(size) for name, size in CATEGORY_SIZES.items()}
    for pair in pairs:
        for name, arr in derivation_counts(pair.program).items():
            totals[name] += arr
    return GrammarWeights({name: 1.0 + arr for name, arr in totals.items()})
