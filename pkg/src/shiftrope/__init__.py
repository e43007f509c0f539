"""Shifted rotary position maps and exact two-pass attention.

Core pieces: rotary embedding primitives (`rope`), the standard and shifted
relative-position maps (`posmap`), a per-pair reference attention oracle and
the sliding-window + shifted-block decomposition with exact log-space merge
(`attention`), corpus position-frequency analysis (`freq`), a seeded
tiny-transformer harness with benchmarks (`toyharness`), and a CLI (`cli`).
"""

from .attention import (
    AttentionInputs,
    PartialAttention,
    ScoreCounter,
    merge_partials,
    naive_relpos_attention,
    score_count,
    shifted_attention,
    shifted_block_pass,
    sliding_window_pass,
)
from .errors import ContractViolation, ParseError
from .numerics import Matrix, Precision, logsumexp, matmul, stable_softmax_row
from .posmap import (
    RelPosMap,
    ShiftedMap,
    ShiftParams,
    StandardMap,
    TableMap,
    build_stage_matrices,
    materialize_map,
    max_rel,
    shifted_rel,
    standard_rel,
    validate_params,
)
from .rope import RopeConfig, apply_rope, inv_freqs, rel_score, rotate_rows

__version__ = "0.1.0"

__all__ = [
    "AttentionInputs",
    "ContractViolation",
    "Matrix",
    "ParseError",
    "PartialAttention",
    "Precision",
    "RelPosMap",
    "RopeConfig",
    "ScoreCounter",
    "ShiftParams",
    "ShiftedMap",
    "StandardMap",
    "TableMap",
    "apply_rope",
    "build_stage_matrices",
    "inv_freqs",
    "logsumexp",
    "materialize_map",
    "matmul",
    "max_rel",
    "merge_partials",
    "naive_relpos_attention",
    "rel_score",
    "rotate_rows",
    "score_count",
    "shifted_attention",
    "shifted_block_pass",
    "shifted_rel",
    "sliding_window_pass",
    "stable_softmax_row",
    "standard_rel",
    "validate_params",
]
