"""Numpy fallback for the banded online-softmax attention pass.

Processes tile_rows x tile_keys score tiles and folds each into per-row
running (max, sum, output) state, so peak auxiliary memory stays at one tile
plus O(rows * d) regardless of sequence length.
"""

from __future__ import annotations

import numpy as np


def banded_attention(
    qr: np.ndarray,
    kr: np.ndarray,
    v: np.ndarray,
    window: int,
    scale: float,
    tile_rows: int = 128,
    tile_keys: int = 128,
):
    """Row i attends keys [max(0, i - window + 1), i]; returns (out, lse, pairs).

    qr, kr, v: (n, d) float64 with positions already rotated in. out rows are
    softmax-normalized; lse is the per-row log-sum-exp of the scaled scores
    (-inf for rows the band leaves empty, only possible when window < 1).
    """
    n, d = qr.shape
    out = np.zeros((n, d), dtype=np.float64)
    run_max = np.full(n, -np.inf)
    run_sum = np.zeros(n)
    pairs = 0

    for r0 in range(0, n, tile_rows):
        r1 = min(r0 + tile_rows, n)
        rows = np.arange(r0, r1)
        c_lo = max(0, r0 - window + 1)
        for c0 in range(c_lo, r1, tile_keys):
            c1 = min(c0 + tile_keys, r1)
            cols = np.arange(c0, c1)
            mask = (cols[None, :] <= rows[:, None]) & (
                cols[None, :] > rows[:, None] - window
            )
            if not mask.any():
                continue
            pairs += int(mask.sum())
            scores = scale * (qr[r0:r1] @ kr[c0:c1].T)
            scores[~mask] = -np.inf
            tile_max = scores.max(axis=1)
            new_max = np.maximum(run_max[r0:r1], tile_max)
            with np.errstate(invalid="ignore"):
                alpha = np.nan_to_num(np.exp(run_max[r0:r1] - new_max), nan=0.0)
                w = np.nan_to_num(np.exp(scores - new_max[:, None]), nan=0.0)
            run_sum[r0:r1] = run_sum[r0:r1] * alpha + w.sum(axis=1)
            out[r0:r1] = out[r0:r1] * alpha[:, None] + w @ v[c0:c1]
            run_max[r0:r1] = new_max

    covered = run_sum > 0.0
    out[covered] /= run_sum[covered, None]
    with np.errstate(divide="ignore"):
        lse = np.where(covered, run_max + np.log(run_sum, where=covered, out=np.zeros(n)), -np.inf)
    return out, lse, pairs
