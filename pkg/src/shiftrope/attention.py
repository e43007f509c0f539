"""Reference attention over a relative-position map, and its two-pass form.

`naive_relpos_attention` is the exact oracle: every causal pair (m, n) is
scored independently as scale * rel_score(q_m, k_n, map(m, n)), rotating the
query by the pair's relative position. It is O(L^2) score evaluations and is
deliberately kept on a separate computation route from the fast path.

The fast path computes the same result for the shifted map as two passes over
pre-rotated tensors:

  * a sliding-window pass around the diagonal (standard position ids), and
  * a block-causal pass of the last N queries over the first N keys, with the
    query ids replaced by m - S + W (keys keep their standard rotation, so a
    key/value cache would be untouched).

Each pass returns softmax-normalized rows plus the per-row log-sum-exp of its
scores; `merge_partials` recombines the two disjoint key sets exactly by
weighting with exp(lse - lse_total). Normalizers live in log space throughout
because raw sums of exponentials overflow on long rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rope
from .errors import ContractViolation
from .kernels import get_backend
from .numerics import Matrix
from .posmap import RelPosMap, ShiftParams, ShiftedMap

DEFAULT_TILE = 128


@dataclass
class AttentionInputs:
    """Single-head q/k/v of shape (L, d) plus the rotary config and scale."""

    q: Matrix
    k: Matrix
    v: Matrix
    rope: rope.RopeConfig
    scale: float | None = None

    def __post_init__(self):
        shapes = {(m.rows, m.cols) for m in (self.q, self.k, self.v)}
        if len(shapes) != 1:
            raise ContractViolation(f"q/k/v shapes differ: {sorted(shapes)}")
        dtypes = {m.dtype for m in (self.q, self.k, self.v)}
        if len(dtypes) != 1 or self.q.dtype.kind != "f":
            raise ContractViolation("q/k/v must share one float dtype")
        if self.head_dim != self.rope.head_dim:
            raise ContractViolation(
                f"head_dim {self.head_dim} != rope head_dim {self.rope.head_dim}"
            )
        if self.scale is None:
            self.scale = 1.0 / math.sqrt(self.head_dim)

    @property
    def seq_len(self) -> int:
        return self.q.rows

    @property
    def head_dim(self) -> int:
        return self.q.cols


@dataclass
class PartialAttention:
    """One pass's result: normalized rows, per-row lse, first covered query.

    lse[i] is the log-sum-exp of the scaled scores row i saw; -inf flags a row
    that attended no keys (its out row is zero and carries no information).
    """

    out: Matrix
    lse: np.ndarray
    row_offset: int = 0

    def __post_init__(self):
        self.lse = np.asarray(self.lse, dtype=np.float64)
        if self.lse.shape != (self.out.rows,):
            raise ContractViolation("lse length must match out rows")
        if np.any(np.isnan(self.lse)) or np.any(self.lse == np.inf):
            raise ContractViolation("lse must be finite or -inf")

    def is_empty(self, row: int) -> bool:
        return self.lse[row] == -np.inf


@dataclass
class ScoreCounter:
    """Counts score evaluations; monotonically non-decreasing."""

    evaluated_pairs: int = 0

    def add(self, n: int) -> None:
        if n < 0:
            raise ContractViolation("cannot count a negative number of pairs")
        self.evaluated_pairs += n


def naive_relpos_attention(
    inputs: AttentionInputs,
    rel_map: RelPosMap,
    counter: ScoreCounter | None = None,
) -> Matrix:
    """Exact reference: per-pair relative rotation, full softmax per row.

    When the map's value range is compact (as for the standard and shifted
    maps, whose positions stay below L + W) the per-position cos/sin pairs are
    tabulated once; otherwise they are computed row by row. Either way each
    score rotates the query by that pair's relative position against the raw,
    unrotated key.
    """
    L, d = inputs.seq_len, inputs.head_dim
    q64 = inputs.q.array.astype(np.float64)
    k64 = inputs.k.array.astype(np.float64)
    v64 = inputs.v.array.astype(np.float64)
    ke, ko = k64[:, 0::2].copy(), k64[:, 1::2].copy()
    freqs = rope.inv_freqs(inputs.rope)

    lo, hi = None, None
    for m in range(L):
        row = rel_map.row(m, m + 1)
        rlo, rhi = int(row.min()), int(row.max())
        lo = rlo if lo is None else min(lo, rlo)
        hi = rhi if hi is None else max(hi, rhi)
    table = None
    if hi - lo + 1 <= 4 * L + 8192:
        table = rope.pair_cos_sin(np.arange(lo, hi + 1, dtype=np.int64), freqs)

    out = np.empty((L, d), dtype=np.float64)
    for m in range(L):
        rels = rel_map.row(m, m + 1)
        if table is not None:
            cos, sin = table[0][rels - lo], table[1][rels - lo]
        else:
            cos, sin = rope.pair_cos_sin(rels, freqs)
        qe, qo = q64[m, 0::2], q64[m, 1::2]
        rot_e = qe * cos - qo * sin
        rot_o = qe * sin + qo * cos
        scores = inputs.scale * (
            (rot_e * ke[: m + 1]).sum(axis=1) + (rot_o * ko[: m + 1]).sum(axis=1)
        )
        weights = np.exp(scores - scores.max())
        out[m] = (weights @ v64[: m + 1]) / weights.sum()
    if counter is not None:
        counter.add(L * (L + 1) // 2)
    return Matrix.from_array(out.astype(inputs.q.dtype))


def _rotated64(x: Matrix, positions, cfg: rope.RopeConfig) -> np.ndarray:
    return np.ascontiguousarray(
        rope.rotate_rows(x.array.astype(np.float64), positions, cfg)
    )


def sliding_window_pass(
    inputs: AttentionInputs,
    window: int,
    tile_rows: int = DEFAULT_TILE,
    tile_keys: int = DEFAULT_TILE,
    counter: ScoreCounter | None = None,
    backend: str | None = None,
) -> PartialAttention:
    """Each query m attends its window keys [max(0, m-window+1), m].

    Positions are the standard ids 0..L-1 for both queries and keys;
    window = L reduces to full causal attention.
    """
    L = inputs.seq_len
    if not 1 <= window <= L:
        raise ContractViolation(f"window must be in [1, {L}], got {window}")
    ids = np.arange(L, dtype=np.int64)
    qr = _rotated64(inputs.q, ids, inputs.rope)
    kr = _rotated64(inputs.k, ids, inputs.rope)
    v64 = np.ascontiguousarray(inputs.v.array.astype(np.float64))
    out, lse, pairs = get_backend(backend).banded_attention(
        qr, kr, v64, window, inputs.scale, tile_rows, tile_keys
    )
    if counter is not None:
        counter.add(pairs)
    return PartialAttention(Matrix.from_array(np.asarray(out)), lse, row_offset=0)


def shifted_block_pass(
    inputs: AttentionInputs,
    params: ShiftParams,
    tile_rows: int = DEFAULT_TILE,
    tile_keys: int = DEFAULT_TILE,
    counter: ScoreCounter | None = None,
    backend: str | None = None,
) -> PartialAttention:
    """Causal attention of queries m in [S, L) over keys n in [0, m - S].

    Query position ids are replaced by m - S + W while keys keep their
    standard rotation, so the realized relative position is (m - n) - S + W.
    """
    L = inputs.seq_len
    if params.seq_len != L:
        raise ContractViolation(
            f"params are for seq_len {params.seq_len}, inputs have {L}"
        )
    s, w = params.shift, params.window
    n_tri = params.tri_height
    if n_tri < 1:
        raise ContractViolation("shifted block requires seq_len - shift >= 1")
    block = np.arange(n_tri, dtype=np.int64)
    qr = _rotated64(
        Matrix.from_array(inputs.q.array[s:]), block + w, inputs.rope
    )
    kr = _rotated64(Matrix.from_array(inputs.k.array[:n_tri]), block, inputs.rope)
    v64 = np.ascontiguousarray(inputs.v.array[:n_tri].astype(np.float64))
    out, lse, pairs = get_backend(backend).banded_attention(
        qr, kr, v64, n_tri, inputs.scale, tile_rows, tile_keys
    )
    if counter is not None:
        counter.add(pairs)
    return PartialAttention(Matrix.from_array(np.asarray(out)), lse, row_offset=s)


def merge_partials(diag: PartialAttention, shifted: PartialAttention, shift: int) -> Matrix:
    """Recombine two disjoint-key-set passes into the full softmax result.

    Rows below the shift are taken from the diagonal pass unchanged; from the
    shift on, rows are blended with weights exp(lse - logaddexp(lse_d, lse_s)),
    which is exactly the softmax over the union of the two key sets.
    """
    L, d = diag.out.rows, diag.out.cols
    if diag.row_offset != 0:
        raise ContractViolation("diagonal pass must cover rows from 0")
    if shifted.row_offset != shift or shifted.out.rows != L - shift:
        raise ContractViolation(
            f"shifted pass must cover rows [{shift}, {L}), got offset "
            f"{shifted.row_offset} with {shifted.out.rows} rows"
        )
    if shifted.out.cols != d:
        raise ContractViolation("partials disagree on head_dim")
    lse_d = diag.lse[shift:]
    lse_s = shifted.lse
    if np.any((lse_d == -np.inf) & (lse_s == -np.inf)):
        raise ContractViolation("a row has no keys in either partial")
    total = np.logaddexp(lse_d, lse_s)
    w_d = np.exp(lse_d - total)
    w_s = np.exp(lse_s - total)
    merged = np.empty((L, d), dtype=np.float64)
    merged[:shift] = diag.out.array[:shift]
    merged[shift:] = (
        w_d[:, None] * diag.out.array[shift:] + w_s[:, None] * shifted.out.array
    )
    return Matrix.from_array(merged)


def shifted_attention(
    inputs: AttentionInputs,
    params: ShiftParams,
    tile_rows: int = DEFAULT_TILE,
    tile_keys: int = DEFAULT_TILE,
    counter: ScoreCounter | None = None,
    backend: str | None = None,
) -> Matrix:
    """Two-pass shifted-map attention; equals the naive oracle on ShiftedMap.

    Evaluates at most L*S + N(N+1)/2 score pairs (see score_count) and never
    materializes an L x L buffer.
    """
    diag = sliding_window_pass(
        inputs, params.shift, tile_rows, tile_keys, counter, backend
    )
    tri = shifted_block_pass(inputs, params, tile_rows, tile_keys, counter, backend)
    merged = merge_partials(diag, tri, params.shift)
    return Matrix.from_array(merged.array.astype(inputs.q.dtype))


def score_count(seq_len: int, params: ShiftParams) -> int:
    """Exact score evaluations of the decomposition: sum_m min(m+1, S) + N(N+1)/2."""
    if params.seq_len != seq_len:
        raise ContractViolation(
            f"params are for seq_len {params.seq_len}, got {seq_len}"
        )
    s, n_tri = params.shift, params.tri_height
    window_pairs = s * (s - 1) // 2 + (seq_len - s + 1) * s
    return window_pairs + n_tri * (n_tri + 1) // 2


__all__ = [
    "AttentionInputs",
    "PartialAttention",
    "ScoreCounter",
    "naive_relpos_attention",
    "sliding_window_pass",
    "shifted_block_pass",
    "merge_partials",
    "shifted_attention",
    "score_count",
    "DEFAULT_TILE",
]
