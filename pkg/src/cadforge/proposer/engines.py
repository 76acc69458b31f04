"""Built-in proposers that learn from selected pairs.

PcfgProposer draws whole programs from weighted grammar choices and
re-estimates the weights from pair derivation counts. The retrieval
proposer keeps a bank of (shape descriptor, program) entries, pulls the
nearest entries for a query shape, and perturbs them; its bank and its
fallback grammar both grow with update, so proposals drift toward
shapes the loop has already solved.
"""
from __future__ import annotations

import numpy as np

from ..dsl import (
    Circle,
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
from ..dsl import ExtrudeDef
from ..errors import CadforgeError, EmptyCloudError, NotNormalizedError
from ..geometry.pointcloud import PointCloud, in_unit_box
from ..seeds import derive_rng, derive_seed
from .base import Proposer
from .grammar import GrammarWeights, default_weights, pcfg_propose, pcfg_update
from .params import DecodingParams

DESCRIPTOR_GRID = 8
DESCRIPTOR_DIM = DESCRIPTOR_GRID ** 3
MUTATION_STRUCTURAL_RATE = 0.3
MUTATION_LITERAL_SPAN = 0.1
_MUTATE_BUDGET = 50


def descriptor(pc) -> np.ndarray:
    """8x8x8 occupancy histogram over the unit box, flattened x-major and
    normalized to sum 1."""
    pts = pc.points if isinstance(pc, PointCloud) else np.asarray(pc, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise EmptyCloudError("descriptor needs a non-empty (n, 3) cloud")
    if not in_unit_box(pts):
        raise NotNormalizedError("descriptor input must lie in the unit box")
    bins = np.clip((pts * DESCRIPTOR_GRID).astype(np.int64), 0, DESCRIPTOR_GRID - 1)
    flat = (bins[:, 0] * DESCRIPTOR_GRID + bins[:, 1]) * DESCRIPTOR_GRID + bins[:, 2]
    counts = np.bincount(flat, minlength=DESCRIPTOR_DIM)
    return counts.astype(np.float64) / len(pts)


class PcfgProposer(Proposer):
    def __init__(self, weights: GrammarWeights | None = None, max_features: int | None = None):
        self.weights = weights if weights is not None else default_weights()
        self.max_features = max_features

    def propose(self, shape, k, params, seed):
        kwargs = {} if self.max_features is None else {"max_features": self.max_features}
        return pcfg_propose(self.weights, k, params, seed, **kwargs)

    def update(self, pairs):
        self.weights = pcfg_update(self.weights, pairs)


class MemoryBank:
    """FIFO store of (descriptor, program) entries, oldest evicted first."""

    def __init__(self, capacity: int = 512):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._descriptors: list[np.ndarray] = []
        self._programs: list[Program] = []

    def __len__(self) -> int:
        return len(self._programs)

    def add(self, desc: np.ndarray, program: Program) -> None:
        if desc.shape != (DESCRIPTOR_DIM,):
            raise ValueError("descriptor must have dimension %d" % DESCRIPTOR_DIM)
        self._descriptors.append(np.asarray(desc, dtype=np.float64))
        self._programs.append(program)
        while len(self._programs) > self.capacity:
            self._descriptors.pop(0)
            self._programs.pop(0)

    def nearest(self, desc: np.ndarray, n: int):
        """(indices, L2 distances) of the n closest entries, ascending."""
        mat = np.stack(self._descriptors)
        d = np.linalg.norm(mat - desc, axis=1)
        order = np.argsort(d, kind="stable")[: min(n, len(d))]
        return order, d[order]

    def program(self, idx: int) -> Program:
        return self._programs[int(idx)]


def _jitter_literals(p: Program, rng: np.random.Generator) -> Program:
    span = MUTATION_LITERAL_SPAN

    def j(x: float) -> float:
        return float(x) * (1.0 + rng.uniform(-span, span))

    statements = []
    for st in p.statements:
        body = st.body
        if isinstance(body, WorkspaceDef):
            body = WorkspaceDef(body.plane, tuple(j(c) for c in body.origin))
        elif isinstance(body, SketchDef):
            profiles = []
            for prof in body.profiles:
                if isinstance(prof, Circle):
                    profiles.append(Circle(j(prof.cx), j(prof.cy), j(prof.r)))
                elif isinstance(prof, Rect):
                    profiles.append(Rect(j(prof.cx), j(prof.cy), j(prof.w), j(prof.h)))
                else:
                    profiles.append(
                        Polygon(tuple((j(x), j(y)) for x, y in prof.vertices))
                    )
            body = SketchDef(body.workspace_id, tuple(profiles))
        elif isinstance(body, ExtrudeDef):
            body = ExtrudeDef(body.sketch_id, j(body.height))
        statements.append(Statement(st.id, body))
    return Program(tuple(statements), p.result_id)


def _mutate(p: Program, rng: np.random.Generator, augment_cfg, token_cap: int) -> Program:
    # Deferred import: augment builds features from this package's grammar.
    from .. import augment as _augment

    for _ in range(_MUTATE_BUDGET):
        candidate = _jitter_literals(p, rng)
        if rng.uniform() < MUTATION_STRUCTURAL_RATE:
            try:
                if rng.uniform() < 0.5:
                    grown = _augment.expand(
                        candidate, augment_cfg, int(rng.integers(2 ** 63))
                    )
                    if grown:
                        candidate = grown[0]
                else:
                    cut = _augment.shorten(candidate)
                    if cut:
                        candidate = cut[int(rng.integers(len(cut)))]
            except CadforgeError:
                continue
        try:
            candidate = canonicalize(candidate)
            validate(candidate)
        except CadforgeError:
            continue
        if count_tokens(candidate) <= token_cap:
            return candidate
    return canonicalize(p)  # every mutation failed; fall back to the original


def _retrieval_choice(distances: np.ndarray, params: DecodingParams):
    """Probabilities over the already-top_k-truncated ascending distances:
    softmax of -d/temperature, then smallest prefix of cumulative mass
    >= top_p, renormalized."""
    if params.temperature < 1e-9:
        probs = np.zeros(len(distances))
        probs[0] = 1.0
        return probs
    logits = -distances / params.temperature
    w = np.exp(logits - logits.max())
    probs = w / w.sum()
    cum = np.cumsum(probs)
    cut = int(np.searchsorted(cum, params.top_p - 1e-12)) + 1
    out = np.zeros(len(distances))
    out[:cut] = probs[:cut] / probs[:cut].sum()
    return out


def retrieve_mutate_propose(
    bank: MemoryBank,
    shape,
    k: int,
    params: DecodingParams,
    seed: int,
    fallback_weights: GrammarWeights | None = None,
    augment_cfg=None,
) -> list[Program]:
    """k programs built by nearest-descriptor retrieval plus a mutation
    pass; an empty bank delegates to pcfg_propose on fallback_weights."""
    if len(bank) == 0:
        gw = fallback_weights if fallback_weights is not None else default_weights()
        return pcfg_propose(gw, k, params, seed)
    from ..augment import AugmentConfig

    if augment_cfg is None:
        augment_cfg = AugmentConfig(token_cap=params.max_tokens)
    desc = descriptor(shape)
    idx, dist = bank.nearest(desc, params.top_k)
    probs = _retrieval_choice(dist, params)
    out = []
    for slot in range(k):
        rng = derive_rng(seed, "retrieve", slot)
        pick = idx[int(rng.choice(len(probs), p=probs))]
        out.append(_mutate(bank.program(pick), rng, augment_cfg, params.max_tokens))
    return out


class MemoryBankProposer(Proposer):
    """Retrieval proposer with a grammar fallback while the bank is empty.

    update both files pairs into the bank and re-estimates the fallback
    grammar, so early iterations (empty bank) improve too.
    """

    def __init__(
        self,
        capacity: int = 512,
        fallback_weights: GrammarWeights | None = None,
        augment_cfg=None,
    ):
        self.bank = MemoryBank(capacity)
        self.fallback_weights = (
            fallback_weights if fallback_weights is not None else default_weights()
        )
        self.augment_cfg = augment_cfg
        self.fallback_proposals = 0

    def propose(self, shape, k, params, seed):
        if len(self.bank) == 0:
            self.fallback_proposals += k
        return retrieve_mutate_propose(
            self.bank, shape, k, params, seed,
            fallback_weights=self.fallback_weights,
            augment_cfg=self.augment_cfg,
        )

    def update(self, pairs):
        pairs = list(pairs)
        for pair in pairs:
            self.bank.add(descriptor(pair.shape), pair.program)
        self.fallback_weights = pcfg_update(self.fallback_weights, pairs)
