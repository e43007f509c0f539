import numpy as np
import pytest

from shiftrope import (
    AttentionInputs,
    ContractViolation,
    Matrix,
    PartialAttention,
    RopeConfig,
    ScoreCounter,
    logsumexp,
    merge_partials,
    naive_relpos_attention,
    rel_score,
    score_count,
    shifted_attention,
    shifted_block_pass,
    sliding_window_pass,
)
from shiftrope.kernels import available_backends
from shiftrope.posmap import ShiftParams, ShiftedMap, StandardMap, TableMap, build_stage_matrices

from util import make_inputs, reference_attention

BACKENDS = available_backends()


def banded_reference(inputs, window):
    """Masked full-reference oracle for the sliding-window pass."""
    q = inputs.q.array.astype(np.float64)
    k = inputs.k.array.astype(np.float64)
    v = inputs.v.array.astype(np.float64)
    L, d = q.shape
    out = np.empty((L, d))
    lse = np.empty(L)
    for m in range(L):
        lo = max(0, m - window + 1)
        scores = np.array(
            [
                inputs.scale * rel_score(q[m], k[n], m - n, inputs.rope)
                for n in range(lo, m + 1)
            ]
        )
        w = np.exp(scores - scores.max())
        out[m] = (w / w.sum()) @ v[lo : m + 1]
        lse[m] = logsumexp(scores)
    return out, lse


class TestNaive:
    def test_single_token_returns_value_row(self):
        inputs = make_inputs(1, 8, seed=0)
        out = naive_relpos_attention(inputs, StandardMap())
        np.testing.assert_allclose(out.array[0], inputs.v.array[0], atol=1e-15)

    def test_matches_from_scratch_reference(self):
        inputs = make_inputs(64, 16, seed=1)
        got = naive_relpos_attention(inputs, StandardMap()).array
        expect = reference_attention(inputs, lambda m, n: m - n)
        assert np.max(np.abs(got - expect)) <= 1e-10

    def test_shifted_reference_equivalence(self):
        p = ShiftParams(48, 16, 4)
        inputs = make_inputs(48, 16, seed=2)

        def rel(m, n):
            d = m - n
            return d - p.shift + p.window if d >= p.shift else d

        got = naive_relpos_attention(inputs, ShiftedMap(p)).array
        expect = reference_attention(inputs, rel)
        assert np.max(np.abs(got - expect)) <= 1e-10

    def test_boundary_shift_changes_last_row_only(self):
        L = 16
        inputs = make_inputs(L, 8, seed=3)
        base = naive_relpos_attention(inputs, StandardMap()).array
        shifted = naive_relpos_attention(
            inputs, ShiftedMap(ShiftParams(L, L - 1, 0))
        ).array
        diff_rows = np.max(np.abs(base - shifted), axis=1)
        assert np.all(diff_rows[:-1] <= 1e-12)
        assert diff_rows[-1] > 1e-6

    def test_undefined_table_entry_rejected(self):
        dropped, _, _ = build_stage_matrices(9, 3, 0)
        inputs = make_inputs(9, 8, seed=4)
        with pytest.raises(ContractViolation):
            naive_relpos_attention(inputs, TableMap(dropped))

    def test_counter_counts_full_causal_set(self):
        inputs = make_inputs(10, 8, seed=5)
        counter = ScoreCounter()
        naive_relpos_attention(inputs, StandardMap(), counter)
        assert counter.evaluated_pairs == 10 * 11 // 2

    def test_huge_position_values_use_direct_path(self):
        # sparse, far-apart ids fall back to per-row trig instead of a table
        table = np.full((3, 3), -2, dtype=np.int64)
        table[np.tril_indices(3)] = [0, 10**9, 0, 2 * 10**9, 10**9, 0]
        inputs = make_inputs(3, 8, seed=6)
        got = naive_relpos_attention(inputs, TableMap(Matrix.from_array(table))).array
        rel_of = {(1, 0): 10**9, (2, 0): 2 * 10**9, (2, 1): 10**9}
        expect = reference_attention(inputs, lambda m, n: rel_of.get((m, n), 0))
        assert np.max(np.abs(got - expect)) <= 1e-8


class TestSlidingWindowPass:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_full_window_equals_naive_standard(self, backend):
        inputs = make_inputs(32, 8, seed=7)
        part = sliding_window_pass(inputs, 32, backend=backend)
        expect = naive_relpos_attention(inputs, StandardMap()).array
        assert np.max(np.abs(part.out.array - expect)) <= 1e-12

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_window_one_copies_values(self, backend):
        inputs = make_inputs(12, 8, seed=8)
        part = sliding_window_pass(inputs, 1, backend=backend)
        np.testing.assert_allclose(part.out.array, inputs.v.array, atol=1e-14)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_masked_reference(self, backend):
        inputs = make_inputs(128, 16, seed=9)
        part = sliding_window_pass(inputs, 40, backend=backend)
        expect_out, expect_lse = banded_reference(inputs, 40)
        assert np.max(np.abs(part.out.array - expect_out)) <= 1e-10
        assert np.max(np.abs(part.lse - expect_lse)) <= 1e-10

    def test_counts_banded_pairs(self):
        inputs = make_inputs(32, 8, seed=10)
        counter = ScoreCounter()
        sliding_window_pass(inputs, 5, counter=counter)
        assert counter.evaluated_pairs == sum(min(m + 1, 5) for m in range(32))

    def test_window_out_of_range(self):
        inputs = make_inputs(8, 8, seed=11)
        for window in (0, 9):
            with pytest.raises(ContractViolation):
                sliding_window_pass(inputs, window)

    def test_odd_tile_sizes_agree(self):
        inputs = make_inputs(67, 8, seed=12)
        a = sliding_window_pass(inputs, 20, tile_rows=16, tile_keys=7, backend="python")
        b = sliding_window_pass(inputs, 20, backend="python")
        assert np.max(np.abs(a.out.array - b.out.array)) <= 1e-12


class TestShiftedBlockPass:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_first_shifted_query_copies_first_value(self, backend):
        p = ShiftParams(24, 9, 3)
        inputs = make_inputs(24, 8, seed=13)
        part = shifted_block_pass(inputs, p, backend=backend)
        assert part.row_offset == 9
        np.testing.assert_allclose(part.out.array[0], inputs.v.array[0], atol=1e-14)

    def test_realized_relative_positions_match_final_stage(self):
        # row m=8 of the L=9, S=3, W=2 example scores keys 0..5 at [7,6,5,4,3,2]
        p = ShiftParams(9, 3, 2)
        _, _, final = build_stage_matrices(9, 3, 2)
        realized = [(8 - n) - p.shift + p.window for n in range(6)]
        assert realized == final.array[8, :6].tolist()

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_scores_equal_rel_score_with_raw_keys(self, backend):
        # binds the pass to the one-sided oracle: its per-row lse must equal
        # logsumexp of scale * rel_score(q_m, k_n, (m-n) - S + W) over raw,
        # unrotated keys -- the query-only shift carries all position info
        L, d = 96, 16
        p = ShiftParams(L, 33, 8)
        inputs = make_inputs(L, d, seed=14)
        part = shifted_block_pass(inputs, p, backend=backend)
        q = inputs.q.array
        k = inputs.k.array
        for m in (p.shift, p.shift + 7, L - 1):
            scores = [
                inputs.scale
                * rel_score(q[m], k[n], (m - n) - p.shift + p.window, inputs.rope)
                for n in range(m - p.shift + 1)
            ]
            assert part.lse[m - p.shift] == pytest.approx(
                logsumexp(np.array(scores)), abs=1e-10
            )

    def test_seq_len_mismatch_rejected(self):
        inputs = make_inputs(16, 8, seed=15)
        with pytest.raises(ContractViolation):
            shifted_block_pass(inputs, ShiftParams(32, 8, 2))


class TestMerge:
    def test_empty_shifted_row_keeps_diag(self):
        rng = np.random.default_rng(16)
        L, d, s = 6, 4, 2
        diag = PartialAttention(
            Matrix.from_array(rng.standard_normal((L, d))), np.zeros(L), 0
        )
        shifted_lse = np.full(L - s, -np.inf)
        shifted_lse[-1] = 0.0
        shifted = PartialAttention(
            Matrix.from_array(np.vstack([np.zeros((L - s - 1, d)), rng.standard_normal(d)])),
            shifted_lse,
            s,
        )
        merged = merge_partials(diag, shifted, s).array
        np.testing.assert_array_equal(merged[s:-1], diag.out.array[s:-1])

    def test_equal_normalizers_average(self):
        rng = np.random.default_rng(17)
        L, d, s = 5, 4, 1
        a = rng.standard_normal((L, d))
        b = rng.standard_normal((L - s, d))
        diag = PartialAttention(Matrix.from_array(a), np.full(L, 1.3), 0)
        shifted = PartialAttention(Matrix.from_array(b), np.full(L - s, 1.3), s)
        merged = merge_partials(diag, shifted, s).array
        np.testing.assert_allclose(merged[s:], 0.5 * (a[s:] + b), atol=1e-14)

    def test_split_and_recombine_oracle(self):
        # softmax over a full score vector must equal the normalizer-weighted
        # merge of its two halves, row by row
        rng = np.random.default_rng(18)
        d = 8
        for _ in range(50):
            n_keys = int(rng.integers(2, 24))
            cut = int(rng.integers(1, n_keys))
            scores = rng.standard_normal(n_keys) * 5
            values = rng.standard_normal((n_keys, d))
            full_w = np.exp(scores - scores.max())
            expect = (full_w / full_w.sum()) @ values

            def normalized(part_scores, part_values):
                w = np.exp(part_scores - part_scores.max())
                return (w / w.sum()) @ part_values, logsumexp(part_scores)

            out_a, lse_a = normalized(scores[:cut], values[:cut])
            out_b, lse_b = normalized(scores[cut:], values[cut:])
            diag = PartialAttention(Matrix.from_array(out_a[None, :]), [lse_a], 0)
            shifted = PartialAttention(Matrix.from_array(out_b[None, :]), [lse_b], 0)
            merged = merge_partials(diag, shifted, 0).array[0]
            assert np.max(np.abs(merged - expect)) <= 1e-12

    def test_coverage_mismatch_rejected(self):
        rng = np.random.default_rng(19)
        diag = PartialAttention(Matrix.from_array(rng.standard_normal((6, 4))), np.zeros(6), 0)
        bad = PartialAttention(Matrix.from_array(rng.standard_normal((3, 4))), np.zeros(3), 1)
        with pytest.raises(ContractViolation):
            merge_partials(diag, bad, 2)

    def test_doubly_empty_row_rejected(self):
        diag = PartialAttention(Matrix.from_array(np.zeros((3, 2))), [0.0, -np.inf, 0.0], 0)
        shifted = PartialAttention(Matrix.from_array(np.zeros((2, 2))), [-np.inf, 0.0], 1)
        with pytest.raises(ContractViolation):
            merge_partials(diag, shifted, 1)


class TestShiftedAttention:
    def test_boundary_params_equal_naive(self):
        p = ShiftParams(4, 3, 0)
        inputs = make_inputs(4, 8, seed=20)
        fast = shifted_attention(inputs, p).array
        oracle = naive_relpos_attention(inputs, ShiftedMap(p)).array
        assert np.max(np.abs(fast - oracle)) <= 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_oracle_equivalence_non_power_of_two(self, seed, backend):
        p = ShiftParams(257, 86, 32)
        inputs = make_inputs(257, 64, seed=seed)
        fast = shifted_attention(inputs, p, backend=backend).array
        oracle = naive_relpos_attention(inputs, ShiftedMap(p)).array
        assert np.max(np.abs(fast - oracle)) <= 1e-9

    def test_zero_window_legal_in_kernel(self):
        L = 90
        p = ShiftParams(L, L // 3, 0)
        inputs = make_inputs(L, 16, seed=21)
        fast = shifted_attention(inputs, p).array
        oracle = naive_relpos_attention(inputs, ShiftedMap(p)).array
        assert np.max(np.abs(fast - oracle)) <= 1e-9

    def test_single_precision_tolerance(self):
        p = ShiftParams(128, 42, 8)
        inputs = make_inputs(128, 16, seed=22, dtype=np.float32)
        fast = shifted_attention(inputs, p).array
        assert fast.dtype == np.float32
        oracle = naive_relpos_attention(inputs, ShiftedMap(p)).array
        assert np.max(np.abs(fast.astype(np.float64) - oracle.astype(np.float64))) <= 1e-4

    @pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
    def test_backend_parity(self):
        p = ShiftParams(200, 66, 16)
        inputs = make_inputs(200, 32, seed=23)
        a = shifted_attention(inputs, p, backend="cython").array
        b = shifted_attention(inputs, p, backend="python").array
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_unknown_backend_rejected(self):
        inputs = make_inputs(8, 8, seed=24)
        with pytest.raises(ContractViolation):
            shifted_attention(inputs, ShiftParams(8, 3, 1), backend="fortran")


class TestRegionPartition:
    @pytest.mark.parametrize("L", [17, 64, 257, 512])
    def test_pass_key_sets_partition_causal_set(self, L):
        for shift in {max(1, L // 5), max(1, L // 3), max(1, L // 2)}:
            n_tri = L - shift
            for m in range(L):
                window_keys = set(range(max(0, m - shift + 1), m + 1))
                shifted_keys = (
                    set(range(0, m - shift + 1)) if m >= shift else set()
                )
                assert not (window_keys & shifted_keys)
                assert window_keys | shifted_keys == set(range(m + 1))
                if m >= shift:
                    assert max(shifted_keys) <= n_tri - 1


class TestScoreCount:
    def test_tiny_example_covers_all_pairs_once(self):
        assert score_count(9, ShiftParams(9, 3, 0)) == 45

    def test_full_window_degenerate(self):
        # S = L is not a constructible shift; the same degenerate count is
        # what the sliding pass alone evaluates at window = L
        inputs = make_inputs(16, 8, seed=25)
        counter = ScoreCounter()
        sliding_window_pass(inputs, 16, counter=counter)
        assert counter.evaluated_pairs == 16 * 17 // 2

    @pytest.mark.parametrize("L,shift", [(64, 21), (128, 64), (257, 51), (512, 170)])
    def test_instrumented_run_matches_closed_form(self, L, shift):
        p = ShiftParams(L, shift, min(8, shift - 1))
        inputs = make_inputs(L, 8, seed=26)
        counter = ScoreCounter()
        shifted_attention(inputs, p, counter=counter)
        assert counter.evaluated_pairs == score_count(L, p)

    def test_equals_full_causal_set_by_partition(self):
        # the two regions tile the causal set exactly, so the closed form
        # always sums to L(L+1)/2 -- the win is memory/tiling, not pair count
        for L, shift in ((9, 3), (64, 21), (8192, 2731)):
            assert score_count(L, ShiftParams(L, shift, 0)) == L * (L + 1) // 2

    def test_counter_rejects_negative(self):
        with pytest.raises(ContractViolation):
            ScoreCounter().add(-1)
