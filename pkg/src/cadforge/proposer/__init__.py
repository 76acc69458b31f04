from .base import Proposer
from .engines import (
    MemoryBank,
    MemoryBankProposer,
    PcfgProposer,
    descriptor,
    retrieve_mutate_propose,
)
from .grammar import (
    BIN_RANGES,
    CATEGORY_SIZES,
    N_BINS,
    GrammarWeights,
    default_weights,
    derivation_counts,
    hidden_weights,
    pcfg_propose,
    pcfg_update,
    sample_program,
)
from .params import NEUTRAL_PARAMS, DecodingParams, decode_choice, truncated_probs
from .remote import RemoteProposal, RemoteProposer, remote_propose

__all__ = [
    "BIN_RANGES",
    "CATEGORY_SIZES",
    "DecodingParams",
    "GrammarWeights",
    "MemoryBank",
    "MemoryBankProposer",
    "N_BINS",
    "NEUTRAL_PARAMS",
    "PcfgProposer",
    "Proposer",
    "RemoteProposal",
    "RemoteProposer",
    "decode_choice",
    "default_weights",
    "derivation_counts",
    "descriptor",
    "hidden_weights",
    "pcfg_propose",
    "pcfg_update",
    "remote_propose",
    "retrieve_mutate_propose",
    "sample_program",
    "truncated_probs",
]
