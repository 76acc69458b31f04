"""Deterministic seed derivation.

Every stochastic stage derives its generator from a tuple of components
(run seed, stage name, iteration, target index, ...) so that reruns and
resumed runs consume identical random streams regardless of scheduling.
"""
import hashlib

import numpy as np


def _component(part):
    if isinstance(part, (bool,)):
        raise TypeError("bool seed components are ambiguous")
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"unsupported seed component type: {type(part)!r}")


def derive_rng(*parts) -> np.random.Generator:
    """Generator seeded from the component tuple."""
    return np.random.default_rng([_component(p) for p in parts])


def derive_seed(*parts) -> int:
    """64-bit integer seed derived from the component tuple."""
    seq = np.random.SeedSequence([_component(p) for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])
