"""Shared helpers for the test suite."""

import math

import numpy as np

from shiftrope import AttentionInputs, Matrix, RopeConfig


def make_inputs(seq_len, head_dim, seed, dtype=np.float64, base=10000.0, scale=None):
    rng = np.random.default_rng(seed)
    mats = [
        Matrix.from_array(rng.standard_normal((seq_len, head_dim)).astype(dtype))
        for _ in range(3)
    ]
    return AttentionInputs(*mats, rope=RopeConfig(head_dim, base), scale=scale)


def reference_rotate(x, pos, base):
    """Independent per-pair rotation using plain math.cos/math.sin."""
    d = len(x)
    out = np.empty(d, dtype=np.float64)
    for j in range(d // 2):
        angle = pos * base ** (-2.0 * j / d)
        c, s = math.cos(angle), math.sin(angle)
        out[2 * j] = x[2 * j] * c - x[2 * j + 1] * s
        out[2 * j + 1] = x[2 * j] * s + x[2 * j + 1] * c
    return out


def reference_attention(inputs, rel_fn):
    """From-scratch double-precision attention oracle.

    rel_fn(m, n) -> relative position. Scores each causal pair by rotating
    the query with reference_rotate, then applies a plain softmax per row.
    Kept free of any shiftrope attention/kernel code.
    """
    q = inputs.q.array.astype(np.float64)
    k = inputs.k.array.astype(np.float64)
    v = inputs.v.array.astype(np.float64)
    L, d = q.shape
    base = inputs.rope.base
    out = np.empty((L, d))
    for m in range(L):
        scores = np.array(
            [
                inputs.scale * float(reference_rotate(q[m], rel_fn(m, n), base) @ k[n])
                for n in range(m + 1)
            ]
        )
        w = np.exp(scores - scores.max())
        out[m] = (w / w.sum()) @ v[: m + 1]
    return out
