"""Seeded tiny-transformer harness and attention micro-benchmarks.

The model is a plain pre-norm decoder stack (RMS norm with eps 1e-5,
attention, 4x SiLU MLP, residuals, untied output head) in float64, just large
enough to push the attention kernels through a realistic layer stack. Weights
come from numpy's default_rng (PCG64) with Glorot-uniform bounds, so the same
seed gives bit-identical weights; the bounds are recorded in the model
metadata.

Benchmarks time the naive per-pair oracle against the two-pass decomposition
per sequence length and report medians, exact score-pair counts, and the peak
auxiliary allocation (tracemalloc) — wall times are reported, never asserted.
"""

from __future__ import annotations

import hashlib
import time
import tracemalloc
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from . import attention as attn
from .errors import ContractViolation
from .numerics import Matrix
from .posmap import ShiftParams, ShiftedMap
from .rope import RopeConfig

RMS_EPS = 1e-5
MLP_EXPANSION = 4


@dataclass(frozen=True)
class ToyModelConfig:
    layers: int
    heads: int
    d_model: int
    vocab: int
    seq_len: int
    seed: int
    rope: RopeConfig | None = None

    def __post_init__(self):
        if min(self.layers, self.heads, self.d_model, self.vocab, self.seq_len) < 1:
            raise ContractViolation("all model dimensions must be >= 1")
        if self.d_model % self.heads != 0:
            raise ContractViolation(
                f"d_model {self.d_model} not divisible by heads {self.heads}"
            )
        head_dim = self.d_model // self.heads
        if head_dim % 2 != 0:
            raise ContractViolation(f"head_dim {head_dim} must be even")
        if self.rope is None:
            object.__setattr__(self, "rope", RopeConfig(head_dim))
        elif self.rope.head_dim != head_dim:
            raise ContractViolation(
                f"rope head_dim {self.rope.head_dim} != d_model/heads {head_dim}"
            )

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


@dataclass(frozen=True)
class AttentionStrategy:
    """How each head computes attention: full rotary, two-pass, or oracle."""

    kind: str  # "rope" | "string" | "naive-string"
    params: ShiftParams | None = None

    def __post_init__(self):
        if self.kind not in ("rope", "string", "naive-string"):
            raise ContractViolation(f"unknown strategy {self.kind!r}")
        if self.kind != "rope" and self.params is None:
            raise ContractViolation(f"strategy {self.kind!r} needs shift params")

    @classmethod
    def rope(cls) -> "AttentionStrategy":
        return cls("rope")

    @classmethod
    def two_pass(cls, params: ShiftParams) -> "AttentionStrategy":
        return cls("string", params)

    @classmethod
    def naive(cls, params: ShiftParams) -> "AttentionStrategy":
        return cls("naive-string", params)


@dataclass
class Model:
    cfg: ToyModelConfig
    weights: dict[str, np.ndarray]
    metadata: dict


def init_model(cfg: ToyModelConfig) -> Model:
    """Deterministic Glorot-uniform init; same cfg => bit-identical weights."""
    rng = np.random.default_rng(cfg.seed)
    weights: dict[str, np.ndarray] = {}
    bounds: dict[str, float] = {}

    def draw(name: str, fan_in: int, fan_out: int) -> None:
        bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
        weights[name] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        bounds[name] = bound

    draw("embed", cfg.vocab, cfg.d_model)
    for layer in range(cfg.layers):
        for proj in ("wq", "wk", "wv", "wo"):
            draw(f"layer{layer}.{proj}", cfg.d_model, cfg.d_model)
        draw(f"layer{layer}.mlp_in", cfg.d_model, MLP_EXPANSION * cfg.d_model)
        draw(f"layer{layer}.mlp_out", MLP_EXPANSION * cfg.d_model, cfg.d_model)
        weights[f"layer{layer}.norm_attn"] = np.ones(cfg.d_model)
        weights[f"layer{layer}.norm_mlp"] = np.ones(cfg.d_model)
    weights["norm_final"] = np.ones(cfg.d_model)
    draw("lm_head", cfg.d_model, cfg.vocab)

    metadata = {
        "generator": f"numpy.random.default_rng(seed={cfg.seed}) [PCG64]",
        "init": "uniform(-b, b), b = sqrt(6 / (fan_in + fan_out)); norms start at 1",
        "bounds": bounds,
        "rms_eps": RMS_EPS,
        "mlp": f"{MLP_EXPANSION}x expansion, SiLU",
    }
    return Model(cfg, weights, metadata)


def weights_checksum(model: Model) -> str:
    """SHA-256 over all weight tensors in name order."""
    h = hashlib.sha256()
    for name in sorted(model.weights):
        h.update(name.encode())
        h.update(model.weights[name].tobytes())
    return h.hexdigest()


def _rms_norm(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    scale = 1.0 / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + RMS_EPS)
    return x * scale * weight


def _silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _attend_head(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, cfg: ToyModelConfig, strat: AttentionStrategy
) -> np.ndarray:
    inputs = attn.AttentionInputs(
        Matrix.from_array(q), Matrix.from_array(k), Matrix.from_array(v), cfg.rope
    )
    if strat.kind == "rope":
        return sliding_full(inputs)
    if strat.kind == "string":
        return attn.shifted_attention(inputs, strat.params).array
    return attn.naive_relpos_attention(inputs, ShiftedMap(strat.params)).array


def sliding_full(inputs: attn.AttentionInputs) -> np.ndarray:
    """Full causal rotary attention as the window = L case of the banded pass."""
    return attn.sliding_window_pass(inputs, inputs.seq_len).out.array


def forward(model: Model, tokens, strat: AttentionStrategy) -> Matrix:
    """Run the stack on a token sequence; returns (L, vocab) logits."""
    cfg = model.cfg
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.shape != (cfg.seq_len,):
        raise ContractViolation(
            f"expected {cfg.seq_len} tokens, got shape {tokens.shape}"
        )
    if tokens.min() < 0 or tokens.max() >= cfg.vocab:
        raise ContractViolation("token id out of range")
    if strat.params is not None and strat.params.seq_len != cfg.seq_len:
        raise ContractViolation(
            f"strategy params are for seq_len {strat.params.seq_len}"
        )
    w = model.weights
    h = w["embed"][tokens]
    hd = cfg.head_dim
    for layer in range(cfg.layers):
        x = _rms_norm(h, w[f"layer{layer}.norm_attn"])
        q = x @ w[f"layer{layer}.wq"]
        k = x @ w[f"layer{layer}.wk"]
        v = x @ w[f"layer{layer}.wv"]
        mixed = np.empty_like(q)
        for head in range(cfg.heads):
            sl = slice(head * hd, (head + 1) * hd)
            mixed[:, sl] = _attend_head(q[:, sl], k[:, sl], v[:, sl], cfg, strat)
        h = h + mixed @ w[f"layer{layer}.wo"]
        x = _rms_norm(h, w[f"layer{layer}.norm_mlp"])
        h = h + _silu(x @ w[f"layer{layer}.mlp_in"]) @ w[f"layer{layer}.mlp_out"]
    h = _rms_norm(h, w["norm_final"])
    return Matrix.from_array(h @ w["lm_head"])


@dataclass
class LogitsDiff:
    max_abs: float
    mean_abs: float
    argmax_mismatch_rows: int


def compare_logits(a: Matrix, b: Matrix) -> LogitsDiff:
    """Elementwise deviation metrics plus count of rows whose top-1 differs."""
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise ContractViolation(
            f"shape mismatch: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
        )
    diff = np.abs(a.array.astype(np.float64) - b.array.astype(np.float64))
    mismatches = int(np.sum(a.array.argmax(axis=1) != b.array.argmax(axis=1)))
    return LogitsDiff(float(diff.max()), float(diff.mean()), mismatches)


@dataclass
class BenchRecord:
    seq_len: int
    strategy: str
    median_ms: float
    score_pairs: int
    peak_aux_bytes: int


@dataclass
class BenchReport:
    records: list[BenchRecord] = field(default_factory=list)

    def to_csv(self, sink: IO[str]) -> None:
        sink.write("L,strategy,median_ms,score_pairs,peak_aux_bytes\n")
        for r in self.records:
            sink.write(
                f"{r.seq_len},{r.strategy},{r.median_ms:.3f},"
                f"{r.score_pairs},{r.peak_aux_bytes}\n"
            )


def _measure(fn) -> tuple[int, object]:
    tracemalloc.start()
    tracemalloc.reset_peak()
    result = fn()
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak, result


def bench_attention(
    lengths: list[int],
    shift_frac: float,
    window: int,
    head_dim: int,
    repeats: int,
    seed: int = 0,
    backend: str | None = None,
) -> BenchReport:
    """Median wall time of naive vs decomposed attention per length.

    shift_frac picks S = max(floor(shift_frac * L), window + 1). Timing runs
    are untraced; a separate traced run records peak auxiliary bytes.
    """
    if list(lengths) != sorted(lengths) or not lengths:
        raise ContractViolation("lengths must be a non-empty ascending list")
    if repeats < 3:
        raise ContractViolation(f"repeats must be >= 3, got {repeats}")
    report = BenchReport()
    for seq_len in lengths:
        shift = max(int(seq_len * shift_frac), window + 1)
        params = ShiftParams(seq_len, shift, window)
        rng = np.random.default_rng(seed)
        cfg = RopeConfig(head_dim)
        mats = [
            Matrix.from_array(rng.standard_normal((seq_len, head_dim)))
            for _ in range(3)
        ]
        inputs = attn.AttentionInputs(*mats, rope=cfg)
        shifted_map = ShiftedMap(params)

        def run_naive():
            counter = attn.ScoreCounter()
            attn.naive_relpos_attention(inputs, shifted_map, counter)
            return counter.evaluated_pairs

        def run_decomposed():
            counter = attn.ScoreCounter()
            attn.shifted_attention(inputs, params, counter=counter, backend=backend)
            return counter.evaluated_pairs

        for name, fn in (("naive", run_naive), ("decomposed", run_decomposed)):
            peak, pairs = _measure(fn)
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn()
                times.append((time.perf_counter() - t0) * 1e3)
            report.records.append(
                BenchRecord(seq_len, name, float(np.median(times)), pairs, peak)
            )
    return report
