"""Relative-position maps over the causal triangle.

The standard causal map assigns each pair (m, n) with m >= n the relative
position m - n, which forms a lower-triangular Toeplitz pattern. The shifted
map rewrites the far region of that pattern in three conceptual stages:

  (a) drop    — positions >= N (with N = L - S) are marked as removed;
  (b) shift   — pairs at distance m - n >= S are re-labelled (m - n) - S,
                sliding the well-populated diagonals into the vacated corner;
  (c) window  — a small constant W is added back on the shifted region so the
                nearest W keys of every query keep the smallest positions.

The final map is a pure function of (m, n) and is evaluated lazily; the staged
matrices exist only for inspection and tests, and materialization is capped
because realistic sequence lengths (128K and up) would need ~10^10 entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .numerics import Matrix

# Sentinels used in materialized tables. DROPPED marks stage-(a) removals,
# NOT_CAUSAL fills the unused upper triangle. Both are invalid as positions.
DROPPED = -1
NOT_CAUSAL = -2

MATERIALIZE_LIMIT = 4096

ADVISORY_MIN_WINDOW = 32


@dataclass(frozen=True)
class ShiftParams:
    """Shifted-map parameters: sequence length L, shift S, local window W.

    Requires 0 <= W < S < L. The height of the shifted triangle is
    N = L - S (`tri_height`). Values outside the advisory ranges (see
    `validate_params`) are legal; they only trigger warnings.
    """

    seq_len: int
    shift: int
    window: int

    def __post_init__(self):
        _hard_check(self.seq_len, self.shift, self.window)

    @property
    def tri_height(self) -> int:
        return self.seq_len - self.shift


def _hard_check(seq_len: int, shift: int, window: int) -> None:
    if seq_len < 2:
        raise ContractViolation(f"seq_len must be >= 2, got {seq_len}")
    if shift >= seq_len:
        raise ContractViolation(f"shift must be < seq_len ({shift} >= {seq_len})")
    if shift < 1:
        raise ContractViolation(f"shift must be >= 1, got {shift}")
    if window < 0:
        raise ContractViolation(f"window must be >= 0, got {window}")
    if window >= shift:
        raise ContractViolation(f"window must be < shift ({window} >= {shift})")


def validate_params(p: ShiftParams) -> list[str]:
    """Non-fatal advisories for parameters outside the recommended ranges.

    Hard invariant violations never reach here; they are rejected when the
    ShiftParams is constructed. The recommended ranges are W >= 32 and
    L/3 <= S <= L/2, with the real-valued endpoints rounded outward so that
    e.g. S = floor(L/3) does not warn.
    """
    advisories = []
    if p.window < ADVISORY_MIN_WINDOW:
        advisories.append(
            f"window {p.window} is below the suggested minimum {ADVISORY_MIN_WINDOW}"
        )
    lo = p.seq_len // 3
    hi = (p.seq_len + 1) // 2
    if p.shift < lo or p.shift > hi:
        advisories.append(
            f"shift {p.shift} is outside the suggested range "
            f"[seq_len/3, seq_len/2] = [{lo}, {hi}]"
        )
    return advisories


def standard_rel(m: int, n: int) -> int:
    """Relative position of the standard causal map: m - n."""
    if n < 0 or n > m:
        raise ContractViolation(f"require m >= n >= 0, got ({m}, {n})")
    return m - n


def shifted_rel(m: int, n: int, p: ShiftParams) -> int:
    """Relative position after the drop/shift/window transform.

    (m - n) - S + W on the far region m - n >= S; m - n unchanged on the
    near-diagonal band. Shifted values land in [W, max_rel(p)]; banded ones
    stay below S (so everything is within max_rel whenever S <= L - S).
    """
    if n < 0 or n > m or m >= p.seq_len:
        raise ContractViolation(
            f"require 0 <= n <= m < {p.seq_len}, got ({m}, {n})"
        )
    d = m - n
    if d >= p.shift:
        return d - p.shift + p.window
    return d


def max_rel(p: ShiftParams) -> int:
    """Largest position the shift introduces: N - 1 + W, attained at (L-1, 0).

    This bounds the whole map whenever S <= L - S; for larger shifts the
    untouched near band can still carry distances up to S - 1.
    """
    return p.tri_height - 1 + p.window


class RelPosMap:
    """A mapping (m, n) -> relative position id over causal pairs m >= n."""

    def rel(self, m: int, n: int) -> int:
        raise NotImplementedError

    def row(self, m: int, count: int) -> np.ndarray:
        """Relative positions of (m, n) for n = 0..count-1 as an int64 vector."""
        return np.array([self.rel(m, n) for n in range(count)], dtype=np.int64)


class StandardMap(RelPosMap):
    """The plain causal Toeplitz map: rel(m, n) = m - n."""

    def rel(self, m: int, n: int) -> int:
        return standard_rel(m, n)

    def row(self, m: int, count: int) -> np.ndarray:
        if count > m + 1:
            raise ContractViolation(f"row {m} has only {m + 1} causal entries")
        return m - np.arange(count, dtype=np.int64)


class ShiftedMap(RelPosMap):
    """Lazy evaluation of the drop/shift/window transform."""

    def __init__(self, params: ShiftParams):
        self.params = params

    def rel(self, m: int, n: int) -> int:
        return shifted_rel(m, n, self.params)

    def row(self, m: int, count: int) -> np.ndarray:
        p = self.params
        if count > m + 1 or m >= p.seq_len:
            raise ContractViolation(
                f"row {m} limited to {min(m + 1, p.seq_len)} causal entries"
            )
        d = m - np.arange(count, dtype=np.int64)
        return np.where(d >= p.shift, d - p.shift + p.window, d)


class TableMap(RelPosMap):
    """Map backed by a materialized table; sentinel entries are undefined."""

    def __init__(self, table: Matrix):
        if table.rows != table.cols:
            raise ContractViolation("position table must be square")
        self.table = table

    def rel(self, m: int, n: int) -> int:
        arr = self.table.array
        if n < 0 or n > m or m >= self.table.rows:
            raise ContractViolation(
                f"require 0 <= n <= m < {self.table.rows}, got ({m}, {n})"
            )
        value = int(arr[m, n])
        if value < 0:
            raise ContractViolation(f"position table has no entry at ({m}, {n})")
        return value

    def row(self, m: int, count: int) -> np.ndarray:
        if count > m + 1 or m >= self.table.rows:
            raise ContractViolation(
                f"row {m} limited to {min(m + 1, self.table.rows)} causal entries"
            )
        values = self.table.array[m, :count].astype(np.int64)
        if np.any(values < 0):
            n_bad = int(np.argmax(values < 0))
            raise ContractViolation(f"position table has no entry at ({m}, {n_bad})")
        return values


def _check_materializable(seq_len: int, limit: int) -> None:
    if seq_len > limit:
        raise ContractViolation(
            f"refusing to materialize {seq_len}x{seq_len} table (limit {limit}); "
            "use the lazy map instead"
        )


def materialize_map(rel_map: RelPosMap, seq_len: int, limit: int = MATERIALIZE_LIMIT) -> Matrix:
    """Dense int64 table of a map, NOT_CAUSAL above the diagonal."""
    _check_materializable(seq_len, limit)
    table = np.full((seq_len, seq_len), NOT_CAUSAL, dtype=np.int64)
    for m in range(seq_len):
        table[m, : m + 1] = rel_map.row(m, m + 1)
    return Matrix.from_array(table)


def build_stage_matrices(
    seq_len: int, shift: int, window: int, limit: int = MATERIALIZE_LIMIT
) -> tuple[Matrix, Matrix, Matrix]:
    """The three stages of the transform as dense tables (drop, shift, window).

    Only defined when the shifted region covers the dropped one (S <= N,
    i.e. S <= L/2): beyond that the staged story would leave holes that the
    final lazy map does not have. The final stage matches shifted_rel
    pointwise and contains no DROPPED sentinel in the causal region.
    """
    _check_materializable(seq_len, limit)
    p = ShiftParams(seq_len, shift, window)
    n_keep = p.tri_height
    if shift > n_keep:
        raise ContractViolation(
            f"staged view requires shift <= {n_keep} (= seq_len - shift); "
            "larger shifts drop positions the shift stage cannot refill"
        )
    m_idx = np.arange(seq_len, dtype=np.int64)[:, None]
    n_idx = np.arange(seq_len, dtype=np.int64)[None, :]
    dist = m_idx - n_idx
    causal = dist >= 0

    dropped = np.where(causal & (dist < n_keep), dist, DROPPED)
    dropped[~causal] = NOT_CAUSAL

    far = causal & (dist >= shift)
    shifted = np.where(far, dist - shift, dropped)
    final = np.where(far, dist - shift + window, shifted)
    return (
        Matrix.from_array(dropped),
        Matrix.from_array(shifted),
        Matrix.from_array(final),
    )


def render_ascii(table: Matrix) -> str:
    """Fixed-width text rendering; dropped entries print as a middle dot."""
    arr = table.array
    in_range = arr[arr >= 0]
    width = max(len(str(int(v))) for v in in_range) if in_range.size else 1
    lines = []
    for row in arr:
        cells = []
        for v in row:
            if v == NOT_CAUSAL:
                cells.append(" " * width)
            elif v == DROPPED:
                cells.append("·".rjust(width))
            else:
                cells.append(str(int(v)).rjust(width))
        lines.append(" ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(table: Matrix) -> str:
    """CSV rendering; dropped entries are -1, the upper triangle is empty."""
    arr = table.array
    lines = []
    for row in arr:
        cells = ["" if v == NOT_CAUSAL else str(int(v)) for v in row]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
