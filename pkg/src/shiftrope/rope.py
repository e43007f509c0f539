"""Rotary position embedding on interleaved pairs.

A vector of even dimension d is treated as d/2 two-dimensional pairs
(x[2j], x[2j+1]); position p rotates pair j by the angle p * freq_j with
freq_j = base**(-2j/d). The inner product of two rotated vectors then depends
only on the difference of their positions, which is what makes a query-only
position shift legal downstream.

Angles are always computed in double precision, and the product p * freq_j is
formed with a compensated (two-product) multiplication: at positions around
10**6 a plain float64 product already carries ~1e-10 of angle rounding, enough
to break the two-sided/one-sided rotation identity at the tolerances we hold
it to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

_SPLIT = 134217729.0  # 2**27 + 1, Dekker splitting constant


@dataclass(frozen=True)
class RopeConfig:
    """Rotary embedding shape: even head dimension and base frequency."""

    head_dim: int
    base: float = 10000.0

    def __post_init__(self):
        if self.head_dim < 2 or self.head_dim % 2 != 0:
            raise ContractViolation(f"head_dim must be even and >= 2, got {self.head_dim}")
        if not self.base > 1.0:
            raise ContractViolation(f"base must be > 1, got {self.base}")


def inv_freqs(config: RopeConfig) -> np.ndarray:
    """Per-pair frequencies base**(-2j/d), j = 0..d/2-1; starts at 1, decreasing."""
    j = np.arange(config.head_dim // 2, dtype=np.float64)
    return config.base ** (-2.0 * j / config.head_dim)


def pair_cos_sin(positions, freqs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin of positions x freqs with compensated products.

    positions: integer array-like, any shape; freqs: (d/2,) float64.
    Returns two arrays shaped positions.shape + (d/2,).
    """
    a = np.asarray(positions, dtype=np.float64)[..., None]
    b = np.asarray(freqs, dtype=np.float64)
    h = a * b
    # Dekker two-product: h + err == a*b exactly
    ca = _SPLIT * a
    a_hi = ca - (ca - a)
    a_lo = a - a_hi
    cb = _SPLIT * b
    b_hi = cb - (cb - b)
    b_lo = b - b_hi
    err = ((a_hi * b_hi - h) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    ch = np.cos(h)
    sh = np.sin(h)
    # first-order correction; err is ~1e-10 at worst so higher orders are noise
    return ch - err * sh, sh + err * ch


def rotate_rows(x: np.ndarray, positions, config: RopeConfig) -> np.ndarray:
    """Rotate each row x[i] by its position positions[i]. x: (n, d) float."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.head_dim:
        raise ContractViolation(
            f"expected (n, {config.head_dim}) array, got shape {x.shape}"
        )
    cos, sin = pair_cos_sin(positions, inv_freqs(config))
    out = np.empty_like(x)
    xe, xo = x[:, 0::2], x[:, 1::2]
    out[:, 0::2] = xe * cos - xo * sin
    out[:, 1::2] = xe * sin + xo * cos
    return out


def apply_rope(x: np.ndarray, pos: int, config: RopeConfig) -> np.ndarray:
    """Rotate a single d-vector by position pos (norm-preserving)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != config.head_dim:
        raise ContractViolation(
            f"expected length-{config.head_dim} vector, got shape {x.shape}"
        )
    return rotate_rows(x[None, :], [pos], config)[0]


def rel_score(q: np.ndarray, k: np.ndarray, rel: int, config: RopeConfig) -> float:
    """Attention score of q against k at relative position rel.

    Equals <apply_rope(q, a), apply_rope(k, b)> for any positions with
    a - b == rel; here the rotation is folded onto q alone.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != (config.head_dim,) or k.shape != (config.head_dim,):
        raise ContractViolation(
            f"q and k must both have length {config.head_dim}"
        )
    return float(apply_rope(q, rel, config) @ k)
