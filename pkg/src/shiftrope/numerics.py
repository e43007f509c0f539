"""Minimal dense numeric primitives shared by the rest of the package.

Everything here is a thin, contract-checked layer over numpy: row-major 2D
matrices, a numerically stable softmax, and log-sum-exp. Accumulation happens
in double precision even when the stored values are single precision, so that
comparisons between independently computed results stay meaningful.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import ContractViolation

_ALLOWED_DTYPES = (np.float32, np.float64, np.int64)


class Precision(enum.Enum):
    """Storage precision of a computation, with the tolerances keyed to it."""

    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self):
        return np.float32 if self is Precision.SINGLE else np.float64

    @property
    def attention_tol(self) -> float:
        """Max abs deviation allowed between decomposed and reference attention."""
        return 1e-4 if self is Precision.SINGLE else 1e-9

    @property
    def rotary_tol(self) -> float:
        """Max abs deviation allowed in the rotary relative-position identity."""
        return 1e-5 if self is Precision.SINGLE else 1e-10

    @classmethod
    def from_name(cls, name: str) -> "Precision":
        try:
            return cls(name)
        except ValueError:
            raise ContractViolation(f"unknown precision {name!r}") from None


class Matrix:
    """Row-major 2D array with validated shape and (for floats) finite entries."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: np.ndarray):
        data = np.asarray(data)
        if data.ndim != 1:
            data = data.ravel()
        if rows < 0 or cols < 0 or data.size != rows * cols:
            raise ContractViolation(
                f"data length {data.size} does not match {rows}x{cols}"
            )
        if data.dtype.type not in _ALLOWED_DTYPES:
            raise ContractViolation(f"unsupported dtype {data.dtype}")
        if data.dtype.kind == "f" and not np.all(np.isfinite(data)):
            raise ContractViolation("matrix contains NaN or Inf entries")
        self.rows = rows
        self.cols = cols
        self.data = data

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Matrix":
        arr = np.ascontiguousarray(arr)
        if arr.ndim != 2:
            raise ContractViolation(f"expected 2D array, got ndim={arr.ndim}")
        return cls(arr.shape[0], arr.shape[1], arr.reshape(-1))

    @property
    def array(self) -> np.ndarray:
        """(rows, cols) view of the flat storage."""
        return self.data.reshape(self.rows, self.cols)

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols}, {self.data.dtype})"


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product, accumulated in float64 regardless of storage."""
    if a.cols != b.rows:
        raise ContractViolation(
            f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}"
        )
    prod = a.array.astype(np.float64) @ b.array.astype(np.float64)
    out_dtype = np.promote_types(a.dtype, b.dtype)
    if out_dtype.kind == "i":
        out_dtype = np.dtype(np.float64)
    return Matrix.from_array(prod.astype(out_dtype))


def stable_softmax_row(v: np.ndarray) -> np.ndarray:
    """Softmax of a 1D vector with the max subtracted before exponentiation."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolation("softmax requires a non-empty 1D vector")
    if v.dtype.kind == "f" and not np.all(np.isfinite(v)):
        raise ContractViolation("softmax input must be finite")
    shifted = v.astype(np.float64) - np.max(v.astype(np.float64))
    e = np.exp(shifted)
    out = e / e.sum()
    return out.astype(v.dtype) if v.dtype.kind == "f" else out


def logsumexp(v: np.ndarray) -> float:
    """log(sum(exp(v))) computed via max-shift; exact for single elements."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolation("logsumexp requires a non-empty 1D vector")
    m = np.max(v)
    if not np.isfinite(m):
        # all -inf stays -inf; any +inf/NaN propagates
        return float(m)
    return float(m + np.log(np.exp(v - m).sum()))
