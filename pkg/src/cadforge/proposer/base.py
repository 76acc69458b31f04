from __future__ import annotations

from abc import ABC, abstractmethod

from ..dsl import Program
from .params import DecodingParams


class Proposer(ABC):
    """Candidate-program generator conditioned on a target point cloud.

    propose must be deterministic given (state, shape, k, params, seed)
    and every returned program must parse, validate, and fit max_tokens.
    propose is read-only on state; update is single-writer and must not
    overlap a running propose.
    """

    @abstractmethod
    def propose(self, shape, k: int, params: DecodingParams, seed: int) -> list[Program]:
        ...

    @abstractmethod
    def update(self, pairs) -> None:
        ...

    def propose_batch(self, shapes, k: int, params: DecodingParams, seeds) -> list[list[Program]]:
        return [
            self.propose(shape, k, params, seed)
            for shape, seed in zip(shapes, seeds, strict=True)
        ]
