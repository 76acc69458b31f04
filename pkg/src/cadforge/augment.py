"""Program-level data growth: expansion and shortening.

Expansion appends one feature (sketch + extrude + boolean combine) per
variant, either on an existing workspace or on a freshly spawned one
whose origin lands inside 1.5x the solid's bounding box so the new part
plausibly touches the old. Variants that bust the workspace cap or the
token cap, execute to nothing, or fail to grow the token count are
dropped silently. Shortening re-roots the program at each child of the
root boolean, one level per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import (
    BOOLEAN_OPS,
    PLANES,
    BooleanDef,
    ExtrudeDef,
    Program,
    SketchDef,
    Statement,
    WorkspaceDef,
    canonicalize,
    count_tokens,
    statement_kind,
    validate,
    workspace_count,
)
from .errors import EmptyResultError
from .geometry import PointCloud, execute, surface_sample
from .proposer.grammar import (
    GrammarWeights,
    default_weights,
    sample_profile_list,
    sample_value,
)
from .proposer.params import NEUTRAL_PARAMS
from .seeds import derive_rng, derive_seed

PROBE_POINTS = 16  # cheap non-emptiness probe for candidate variants


@dataclass(frozen=True)
class AugmentConfig:
    w_max: int = 5
    max_expand_variants: int = 3
    feature_generator: GrammarWeights = field(default_factory=default_weights)
    token_cap: int = 1200

    def __post_init__(self):
        if self.w_max < 1:
            raise ValueError("w_max must be at least 1")
        if self.max_expand_variants < 1:
            raise ValueError("max_expand_variants must be at least 1")
        if self.token_cap < 1:
            raise ValueError("token_cap must be positive")


def _fresh_id(prefix: str, used: set[str]) -> str:
    n = 0
    while f"{prefix}{n}" in used:
        n += 1
    used.add(f"{prefix}{n}")
    return f"{prefix}{n}"


def _weighted(rng: np.random.Generator, weights: np.ndarray) -> int:
    return int(rng.choice(len(weights), p=weights / weights.sum()))


def expand(p: Program, cfg: AugmentConfig, seed: int) -> list[Program]:
    """Up to max_expand_variants grown copies of p; empty when every
    attempt fails a filter."""
    base = canonicalize(p)
    base_tokens = count_tokens(base)
    oracle = execute(base)
    if oracle.bbox.empty:
        return []
    region = oracle.bbox.scaled_about_center(1.5)
    workspaces = [st.id for st in base.statements if statement_kind(st.body) == "workspace"]
    gw = cfg.feature_generator

    out: list[Program] = []
    for v in range(cfg.max_expand_variants):
        rng = derive_rng(seed, "expand", v)
        used = {st.id for st in base.statements}
        statements = list(base.statements)

        if _weighted(rng, gw.weights["placement"]) == 1:
            plane = PLANES[_weighted(rng, gw.weights["plane"])]
            origin = tuple(float(x) for x in rng.uniform(region.lo, region.hi))
            wid = _fresh_id("w", used)
            statements.append(Statement(wid, WorkspaceDef(plane, origin)))
        else:
            wid = workspaces[int(rng.integers(len(workspaces)))]

        sid = _fresh_id("s", used)
        statements.append(
            Statement(sid, SketchDef(wid, sample_profile_list(gw, NEUTRAL_PARAMS, rng)))
        )
        eid = _fresh_id("b", used)
        statements.append(
            Statement(eid, ExtrudeDef(sid, sample_value(gw, "height", NEUTRAL_PARAMS, rng)))
        )
        op = BOOLEAN_OPS[_weighted(rng, gw.weights["boolean_op"])]
        rid = _fresh_id("b", used)
        statements.append(Statement(rid, BooleanDef(op, base.result_id, eid)))

        candidate = canonicalize(Program(tuple(statements), rid))
        validate(candidate)
        if workspace_count(candidate) > cfg.w_max:
            continue
        tokens = count_tokens(candidate)
        if tokens > cfg.token_cap or tokens <= base_tokens:
            continue
        try:
            surface_sample(execute(candidate), PROBE_POINTS, derive_seed(seed, "probe", v))
        except EmptyResultError:
            continue
        out.append(candidate)
    return out


def shorten(p: Program) -> list[Program]:
    """Re-root at each child of the root boolean; empty when the root is
    not a boolean. One level per call."""
    canon = canonicalize(p)
    root = next(st for st in canon.statements if st.id == canon.result_id)
    if not isinstance(root.body, BooleanDef):
        return []
    return [
        canonicalize(Program(canon.statements, child))
        for child in (root.body.left_id, root.body.right_id)
    ]


def diversify(
    p: Program, cfg: AugmentConfig, seed: int, m: int
) -> list[tuple[Program, PointCloud]]:
    """p plus its grown and shortened variants, each paired with a fresh
    boundary sample of its own execution. Emptiness is fatal only for p;
    empty variants are dropped."""
    base = canonicalize(p)
    pairs = [(base, surface_sample(execute(base), m, derive_seed(seed, "sample", 0)))]
    variants = expand(base, cfg, derive_seed(seed, "grow")) + shorten(base)
    for i, variant in enumerate(variants):
        try:
            cloud = surface_sample(execute(variant), m, derive_seed(seed, "sample", i + 1))
        except EmptyResultError:
            continue
        pairs.append((variant, cloud))
    return pairs
