"""Command-line front end.

Subcommands: posmap (render position matrices), freq (corpus position
frequency), attn-check (decomposed vs oracle equivalence), bench (attention
micro-benchmark CSV), model-run (toy-model forward + logits checksum).

Exit codes: 0 success, 1 check/data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys

import numpy as np

from . import attention as attn
from . import freq as freqmod
from . import posmap, toyharness
from .errors import ContractViolation, ParseError
from .numerics import Matrix, Precision
from .rope import RopeConfig

USAGE_ERROR = 2
CHECK_FAILURE = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftrope",
        description="Shifted rotary position maps and two-pass attention tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("posmap", help="render a shifted position matrix")
    p.add_argument("--len", dest="seq_len", type=int, required=True)
    p.add_argument("--shift", type=int, required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--stages", action="store_true", help="show drop/shift/window stages")
    p.add_argument("--format", choices=["ascii", "csv"], default="ascii")
    p.add_argument("--limit", type=int, default=posmap.MATERIALIZE_LIMIT)

    p = sub.add_parser("freq", help="position-frequency curve from a length histogram")
    p.add_argument("--hist", required=True, help="CSV of length,count rows")
    p.add_argument("--train-len", dest="train_len", type=int, required=True)
    p.add_argument("--packing", choices=["none", "truncate", "concat"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tail-at", dest="tail_at", type=int, default=None)

    p = sub.add_parser("attn-check", help="decomposed vs naive-oracle equivalence")
    p.add_argument("--len", dest="seq_len", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--shift", type=int, required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dtype", choices=["single", "double"], required=True)

    p = sub.add_parser("bench", help="naive vs decomposed timing/counters CSV")
    p.add_argument("--lens", required=True, help="comma-separated ascending lengths")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--shift-frac", dest="shift_frac", type=float, required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--repeats", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("model-run", help="toy-model forward pass")
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--heads", type=int, required=True)
    p.add_argument("--dmodel", type=int, required=True)
    p.add_argument("--vocab", type=int, required=True)
    p.add_argument("--len", dest="seq_len", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=["rope", "string", "naive-string"], default="rope")
    p.add_argument("--shift", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--compare", action="store_true",
                   help="run string and naive-string and report logit deviations")
    return parser


def _cmd_posmap(args) -> int:
    render = posmap.render_ascii if args.format == "ascii" else posmap.render_csv
    params = posmap.ShiftParams(args.seq_len, args.shift, args.window)
    for note in posmap.validate_params(params):
        print(f"advisory: {note}", file=sys.stderr)
    if args.stages:
        stages = posmap.build_stage_matrices(
            args.seq_len, args.shift, args.window, args.limit
        )
        for label, table in zip(("drop", "shift", "window"), stages):
            print(f"# stage: {label}")
            sys.stdout.write(render(table))
    else:
        table = posmap.materialize_map(
            posmap.ShiftedMap(params), args.seq_len, args.limit
        )
        sys.stdout.write(render(table))
    return 0


def _cmd_freq(args) -> int:
    with open(args.hist, "r", encoding="utf-8") as fh:
        hist = freqmod.load_histogram(fh)
    packed = freqmod.apply_packing(
        hist, args.train_len, freqmod.PackingMode(args.packing)
    )
    curve = freqmod.position_freq(packed, args.train_len)
    with open(args.out, "w", encoding="utf-8") as fh:
        freqmod.export_curve(curve, fh)
    if args.tail_at is not None:
        share = freqmod.tail_share(curve, args.tail_at)
        print(f"tail share from position {args.tail_at}: {share:.6f}")
    return 0


def _random_inputs(seq_len: int, dim: int, seed: int, dtype) -> attn.AttentionInputs:
    rng = np.random.default_rng(seed)
    mats = [
        Matrix.from_array(rng.standard_normal((seq_len, dim)).astype(dtype))
        for _ in range(3)
    ]
    return attn.AttentionInputs(*mats, rope=RopeConfig(dim))


def _cmd_attn_check(args) -> int:
    precision = Precision.from_name(args.dtype)
    params = posmap.ShiftParams(args.seq_len, args.shift, args.window)
    inputs = _random_inputs(args.seq_len, args.dim, args.seed, precision.dtype)
    fast = attn.shifted_attention(inputs, params)
    oracle = attn.naive_relpos_attention(inputs, posmap.ShiftedMap(params))
    diff = float(np.max(np.abs(fast.array.astype(np.float64) - oracle.array.astype(np.float64))))
    tol = precision.attention_tol
    print(f"max abs diff {diff:.6e} (tolerance {tol:.0e}, {args.dtype})")
    return 0 if diff <= tol else CHECK_FAILURE


def _cmd_bench(args) -> int:
    try:
        lengths = [int(part) for part in args.lens.split(",") if part]
    except ValueError:
        raise ContractViolation(f"--lens must be comma-separated integers, got {args.lens!r}")
    report = toyharness.bench_attention(
        lengths, args.shift_frac, args.window, args.dim, args.repeats
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        report.to_csv(fh)
    print(f"wrote {len(report.records)} records to {args.out}")
    return 0


def _logits_checksum(logits: Matrix) -> str:
    h = hashlib.sha256()
    h.update(str((logits.rows, logits.cols)).encode())
    h.update(logits.array.astype(np.float64).tobytes())
    return h.hexdigest()


def _cmd_model_run(args) -> int:
    cfg = toyharness.ToyModelConfig(
        layers=args.layers,
        heads=args.heads,
        d_model=args.dmodel,
        vocab=args.vocab,
        seq_len=args.seq_len,
        seed=args.seed,
    )
    model = toyharness.init_model(cfg)
    tokens = np.random.default_rng(args.seed).integers(0, args.vocab, size=args.seq_len)
    needs_params = args.compare or args.mode in ("string", "naive-string")
    params = None
    if needs_params:
        if args.shift is None or args.window is None:
            raise ContractViolation("--shift and --window are required for string modes")
        params = posmap.ShiftParams(args.seq_len, args.shift, args.window)
    if args.compare:
        fast = toyharness.forward(model, tokens, toyharness.AttentionStrategy.two_pass(params))
        oracle = toyharness.forward(model, tokens, toyharness.AttentionStrategy.naive(params))
        print(f"string logits sha256 {_logits_checksum(fast)}")
        print(f"naive-string logits sha256 {_logits_checksum(oracle)}")
        diff = toyharness.compare_logits(fast, oracle)
        print(
            f"max_abs {diff.max_abs:.6e} mean_abs {diff.mean_abs:.6e} "
            f"argmax_mismatch_rows {diff.argmax_mismatch_rows}"
        )
        return 0
    strat = toyharness.AttentionStrategy(args.mode, params)
    logits = toyharness.forward(model, tokens, strat)
    print(f"logits sha256 {_logits_checksum(logits)}")
    return 0


_COMMANDS = {
    "posmap": _cmd_posmap,
    "freq": _cmd_freq,
    "attn-check": _cmd_attn_check,
    "bench": _cmd_bench,
    "model-run": _cmd_model_run,
}


def run(argv: list[str]) -> int:
    """Parse argv (without the program name) and dispatch; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CHECK_FAILURE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
