"""Position-frequency analysis over corpus length distributions.

Given a histogram of sequence lengths, the frequency of relative position i
under a training window L is f(i) = sum over sequences s of max(|s| - i, 0):
every sequence of length s contains s - i pairs at distance i. The resulting
curve is always non-increasing and heavily front-loaded, which is the whole
motivation for shifting far positions onto near ones.

Packing modes model how a corpus is fitted into the training window: `none`
clips oversized sequences, `truncate` splits them into full chunks plus a
remainder, `concat` glues everything into one stream before chunking. All
counts are 64-bit; trillion-token corpora overflow 32-bit arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import ContractViolation, ParseError


class PackingMode(enum.Enum):
    NONE = "none"
    TRUNCATE_CHUNKS = "truncate"
    CONCAT_CHUNKS = "concat"


@dataclass
class LengthHistogram:
    """Sequence-length counts; lengths and counts are strictly positive."""

    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for length, count in self.counts.items():
            if length < 1:
                raise ContractViolation(f"non-positive length {length}")
            if count < 1:
                raise ContractViolation(f"non-positive count {count} for length {length}")

    def add(self, length: int, count: int = 1) -> None:
        if length < 1 or count < 1:
            raise ContractViolation(f"invalid record ({length}, {count})")
        self.counts[length] = self.counts.get(length, 0) + count

    @property
    def total_tokens(self) -> int:
        return sum(length * count for length, count in self.counts.items())

    @property
    def total_sequences(self) -> int:
        return sum(self.counts.values())


@dataclass
class FreqCurve:
    """f[i] = occurrences of relative position i, i = 0..train_len-1."""

    train_len: int
    f: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.int64)
        if self.train_len < 1 or self.f.shape != (self.train_len,):
            raise ContractViolation("curve length must equal train_len >= 1")
        if np.any(self.f < 0) or np.any(self.f[:-1] < self.f[1:]):
            raise ContractViolation("frequencies must be non-negative and non-increasing")


def load_histogram(source: IO | Iterable[str], format: str = "csv") -> LengthHistogram:
    """Parse `length,count` CSV rows (header optional) into a histogram."""
    if format != "csv":
        raise ContractViolation(f"unsupported format {format!r}")
    hist = LengthHistogram()
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        fields = [fld.strip() for fld in line.split(",")]
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
        try:
            length, count = int(fields[0]), int(fields[1])
        except ValueError:
            if lineno == 1:
                continue  # header row
            raise ParseError(f"non-integer record {line!r}", lineno) from None
        if length < 1:
            raise ParseError(f"non-positive length {length}", lineno)
        if count < 1:
            raise ParseError(f"non-positive count {count}", lineno)
        hist.add(length, count)
    if not hist.counts:
        raise ParseError("no records")
    return hist


def apply_packing(hist: LengthHistogram, train_len: int, mode: PackingMode) -> LengthHistogram:
    """Fit a histogram into the training window.

    none: lengths clip at train_len (an oversized sequence yields one full
    chunk, the rest is discarded). truncate: each sequence splits into full
    chunks plus a remainder. concat: the whole token stream is chunked.
    Truncate and concat preserve the total token count exactly.
    """
    if train_len < 1:
        raise ContractViolation(f"train_len must be >= 1, got {train_len}")
    packed = LengthHistogram()
    if mode is PackingMode.NONE:
        for length, count in hist.counts.items():
            packed.add(min(length, train_len), count)
    elif mode is PackingMode.TRUNCATE_CHUNKS:
        for length, count in hist.counts.items():
            full, rem = divmod(length, train_len)
            if full:
                packed.add(train_len, full * count)
            if rem:
                packed.add(rem, count)
    elif mode is PackingMode.CONCAT_CHUNKS:
        full, rem = divmod(hist.total_tokens, train_len)
        if full:
            packed.add(train_len, full)
        if rem:
            packed.add(rem, 1)
    else:
        raise ContractViolation(f"unknown packing mode {mode!r}")
    return packed


def position_freq(hist: LengthHistogram, train_len: int) -> FreqCurve:
    """f[i] = sum over (length s, count c) of c * max(s - i, 0)."""
    if train_len < 1:
        raise ContractViolation(f"train_len must be >= 1, got {train_len}")
    for length in hist.counts:
        if length > train_len:
            raise ContractViolation(
                f"length {length} exceeds train_len {train_len}; pack the histogram first"
            )
    f = np.zeros(train_len, dtype=np.int64)
    for length, count in hist.counts.items():
        f[:length] += count * (length - np.arange(length, dtype=np.int64))
    return FreqCurve(train_len, f)


def tail_share(curve: FreqCurve, from_pos: int) -> float:
    """Fraction of all position occurrences at positions >= from_pos."""
    if not 0 <= from_pos < curve.train_len:
        raise ContractViolation(
            f"from_pos must be in [0, {curve.train_len}), got {from_pos}"
        )
    total = int(curve.f.sum())
    tail = int(curve.f[from_pos:].sum())
    return tail / total


def export_curve(curve: FreqCurve, sink: IO[str]) -> None:
    """Write `position,frequency` CSV rows in position order."""
    sink.write("position,frequency\n")
    for i, value in enumerate(curve.f):
        sink.write(f"{i},{int(value)}\n")


def load_curve(source: IO | Iterable[str]) -> FreqCurve:
    """Inverse of export_curve; used for round-trip checks."""
    values = []
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line or (lineno == 1 and line == "position,frequency"):
            continue
        pos_s, val_s = line.split(",")
        if int(pos_s) != len(values):
            raise ParseError(f"positions out of order at {pos_s}", lineno)
        values.append(int(val_s))
    if not values:
        raise ParseError("no records")
    return FreqCurve(len(values), np.array(values, dtype=np.int64))
