"""Decoding controls shared by every proposer.

A categorical choice with positive weights ``w`` is decoded by:

1. exponentiate: ``w ** (1 / temperature)`` (in log space),
2. keep the ``top_k`` heaviest entries (ties broken by lower index),
3. nucleus-truncate to the smallest prefix of the survivors, in
   descending order, whose cumulative renormalized mass reaches ``top_p``,
4. renormalize and sample.

As temperature approaches zero the distribution collapses onto the
first-index argmax, so greedy decoding falls out of the same code path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GREEDY_TEMPERATURE = 1e-9
_NUCLEUS_SLACK = 1e-12


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 1.2
    top_p: float = 0.8
    top_k: int = 30
    max_tokens: int = 1200

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be at least 1")


#: Plain weighted sampling: no reshaping, no truncation.
NEUTRAL_PARAMS = DecodingParams(
    temperature=1.0, top_p=1.0, top_k=1_000_000, max_tokens=1_000_000
)


def truncated_probs(
    weights: np.ndarray, temperature: float, top_k: int, top_p: float
) -> np.ndarray:
    """Full-size probability vector after temperature, top-k, and nucleus
    truncation; excluded entries hold exactly zero."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d array")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")

    if temperature < _GREEDY_TEMPERATURE:
        out = np.zeros_like(w)
        out[int(np.argmax(w))] = 1.0
        return out

    logits = np.log(w) / temperature
    logits -= logits.max()
    p = np.exp(logits)
    p /= p.sum()

    # Stable descending sort keeps index order among exact ties.
    order = np.argsort(-p, kind="stable")
    kept = order[: min(top_k, p.size)]
    p_kept = p[kept]
    p_kept = p_kept / p_kept.sum()

    cum = np.cumsum(p_kept)
    cut = int(np.searchsorted(cum, top_p - _NUCLEUS_SLACK)) + 1
    kept = kept[:cut]
    p_kept = p_kept[:cut]
    p_kept = p_kept / p_kept.sum()

    out = np.zeros_like(w)
    out[kept] = p_kept
    return out


def decode_choice(
    weights: np.ndarray, params: DecodingParams, rng: np.random.Generator
) -> int:
    """Sample one category index under the decoding params."""
    probs = truncated_probs(weights, params.temperature, params.top_k, params.top_p)
    return int(rng.choice(probs.size, p=probs))
