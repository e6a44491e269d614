import numpy as np
import pytest

from axq.bounds import AccumulatorBudget, InfeasibleBudgetError
from axq.gpfq import (
    gpfq_axe_channel,
    gpfq_channel,
    gpfq_layer,
    gpfq_memory_efficient_precompute,
)
from axq.numeric import AffineQuantizer, Alphabet
from axq.oracle import verify
from conftest import make_calibration, make_layer


def transcript_oracle(w, X, Xq, quantizer):
    """Independent step-by-step simulation of the greedy iteration rule:
    q_i = Q(<Xq_i, u + w_i X_i> / ||Xq_i||^2), u += w_i X_i - s q_i Xq_i."""
    u = np.zeros(X.shape[1])
    codes = []
    for i in range(len(w)):
        denom = float(Xq[i] @ Xq[i])
        if denom == 0.0:
            codes.append(0)
            continue
        arg = float(Xq[i] @ (u + w[i] * X[i])) / denom
        code = quantizer.quantize(arg)
        codes.append(code)
        u = u + w[i] * X[i] - quantizer.scale * code * Xq[i]
    return np.array(codes, dtype=np.int64), u


def grid_weights(rng, K, C, quant_bits, scale=0.25):
    """Weights exactly representable at the given scale."""
    hi = 2 ** (quant_bits - 1) - 1
    codes = rng.integers(-hi, hi + 1, size=(K, C))
    return codes * scale, codes


class TestGpfqBase:
    def test_exact_grid_weights_with_exact_activations_recover_codes(self, rng):
        K, C, D = 12, 3, 30
        W, expected = grid_weights(rng, K, C, 4)
        X = rng.normal(size=(K, D))
        alphabet = Alphabet(4, signed=True)
        quantizers = [
            AffineQuantizer(scale=0.25, zero_point=0, alphabet=alphabet) for _ in range(C)
        ]
        codes = gpfq_layer(W, X, X, quantizers)  # Xq = X: zero correction path
        assert np.array_equal(codes, expected)

    def test_matches_independent_transcript(self, rng):
        for _ in range(25):
            K = int(rng.integers(2, 8))
            D = int(rng.integers(2, 12))
            W = rng.normal(size=(K, 1))
            X, Xq, _ = make_calibration(rng, K, D, 3)
            q = AffineQuantizer(
                scale=float(np.abs(W).max() / 3), zero_point=0, alphabet=Alphabet(3, signed=True)
            )
            expected, _ = transcript_oracle(W[:, 0], X, Xq, q)
            assert np.array_equal(gpfq_channel(W[:, 0], X, Xq, q), expected)

    def test_orthogonal_rows_decouple(self, rng):
        K = 8
        X, _ = np.linalg.qr(rng.normal(size=(K, K)))  # orthonormal rows/cols
        w = rng.normal(size=K)
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        codes = gpfq_channel(w, X, X, q)
        assert np.array_equal(codes, q.quantize(w))

    def test_error_state_matches_rebuilt_prefix_sums(self, rng):
        # every recorded quantizer argument must equal the one recomputed
        # from scratch off the prefix of emitted codes
        K, D = 10, 16
        w = rng.normal(size=K)
        X, Xq, _ = make_calibration(rng, K, D, 4)
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        sink = []
        codes = gpfq_channel(w, X, Xq, q, arg_sink=sink)
        u = np.zeros(D)
        for i in range(K):
            expected_arg = float(Xq[i] @ (u + w[i] * X[i])) / float(Xq[i] @ Xq[i]) / q.scale
            np.testing.assert_allclose(sink[i][0], expected_arg, rtol=1e-9)
            u += w[i] * X[i] - q.scale * codes[i] * Xq[i]
        np.testing.assert_allclose(
            u,
            sum(w[i] * X[i] - q.scale * codes[i] * Xq[i] for i in range(K)),
            rtol=1e-9,
            atol=1e-12,
        )

    def test_zero_norm_quantized_row_is_skipped(self, rng):
        K, D = 6, 10
        w = rng.normal(size=K)
        X, Xq, _ = make_calibration(rng, K, D, 4)
        Xq = Xq.copy()
        Xq[3] = 0.0  # dead input neuron
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        codes = gpfq_channel(w, X, Xq, q)
        assert codes[3] == 0
        expected, _ = transcript_oracle(w, X, Xq, q)
        assert np.array_equal(codes, expected)

    def test_channel_wrapper_equals_layer_column(self, rng):
        W, quantizers, X, Xq, _ = make_layer(rng, 14, 4, 20, 4, 4)
        layer_codes = gpfq_layer(W, X, Xq, quantizers)
        for c in range(4):
            assert np.array_equal(gpfq_channel(W[:, c], X, Xq, quantizers[c]), layer_codes[:, c])

    def test_sparse_threshold_prunes(self, rng):
        w = rng.normal(size=20)
        X, Xq, _ = make_calibration(rng, 20, 32, 4)
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        plain = gpfq_channel(w, X, Xq, q)
        sparse = gpfq_channel(w, X, Xq, q, lam=2.0)
        assert np.count_nonzero(sparse) < np.count_nonzero(plain)

    def test_shape_validation(self, rng):
        q = AffineQuantizer(scale=1.0, zero_point=0, alphabet=Alphabet(4, signed=True))
        with pytest.raises(ValueError):
            gpfq_layer(np.ones((4, 1)), np.ones((5, 3)), np.ones((5, 3)), [q])
        with pytest.raises(ValueError):
            gpfq_layer(np.ones((4, 2)), np.ones((4, 3)), np.ones((4, 3)), [q])


class TestGpfqAxe:
    def test_huge_budget_is_identical_to_base(self, rng):
        W, quantizers, X, Xq, act_q = make_layer(rng, 24, 3, 40, 4, 6)
        base = gpfq_layer(W, X, Xq, quantizers)
        budget = AccumulatorBudget.make(32, act_q.alphabet, slack=0.5)
        axe = gpfq_layer(W, X, Xq, quantizers, budget=budget, soft=True)
        assert np.array_equal(base, axe)

    @pytest.mark.parametrize("soft", [True, False])
    def test_codes_respect_budget_exactly(self, rng, soft):
        for _ in range(30):
            K = int(rng.integers(4, 48))
            w = rng.normal(size=K) * rng.uniform(0.5, 4.0)
            X, Xq, act_q = make_calibration(rng, K, int(rng.integers(8, 32)), 4)
            q = AffineQuantizer(
                scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
            )
            budget = AccumulatorBudget.make(int(rng.integers(6, 12)), act_q.alphabet)
            codes = gpfq_axe_channel(w, X, Xq, q, budget, soft=soft)
            pos = int(codes[codes > 0].sum())
            neg = int(-codes[codes < 0].sum())
            # exact integer form of sum(pos) <= (2^(P-1)-1)/(2^N-1)
            limit = 2 ** (budget.p_bits - 1) - 1
            assert pos * (2**4 - 1) <= limit
            assert neg * (2**4 - 1) <= limit
            assert verify(codes, budget).passed

    def test_tiny_positive_budget_caps_positive_mass(self, rng):
        K = 12
        w = np.full(K, 5.0)  # all large positive
        X, Xq, act_q = make_calibration(rng, K, 24, 1)
        q = AffineQuantizer(scale=5.0 / 7, zero_point=0, alphabet=Alphabet(4, signed=True))
        budget = AccumulatorBudget.make(3, act_q.alphabet)  # B = 3/1 - 0.5 = 2.5
        codes = gpfq_axe_channel(w, X, Xq, q, budget, soft=False)
        pos_mass = int(codes[codes > 0].sum())
        # one tie-away overshoot is what the 0.5 slack pays for: beta <= B + 0.5
        assert pos_mass <= 3
        assert verify(codes, budget).passed
        # once the positive budget is spent the rest is forced to zero/negative
        first_spent = np.nonzero(np.cumsum(np.where(codes > 0, codes, 0)) >= pos_mass)[0][0]
        assert np.all(codes[first_spent + 1 :] <= 0)

    def test_soft_threshold_shrinks_first_argument(self, rng):
        K = 16
        w = rng.normal(size=K) * 3
        X, Xq, act_q = make_calibration(rng, K, 20, 4)
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        budget = AccumulatorBudget.make(8, act_q.alphabet)
        hard_sink, soft_sink = [], []
        gpfq_axe_channel(w, X, Xq, q, budget, soft=False, arg_sink=hard_sink)
        gpfq_axe_channel(w, X, Xq, q, budget, soft=True, arg_sink=soft_sink)
        # same state at step 0, so the soft argument cannot be larger
        assert abs(soft_sink[0][0]) <= abs(hard_sink[0][0]) + 1e-12

    def test_infeasible_budget_raises_before_work(self, rng):
        w = rng.normal(size=4)
        X, Xq, act_q = make_calibration(rng, 4, 8, 8)
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        with pytest.raises(InfeasibleBudgetError):
            AccumulatorBudget.make(2, act_q.alphabet)

    def test_tiled_budgets_reset_per_tile(self, rng):
        K, T = 21, 6
        w = rng.normal(size=K) * 4
        X, Xq, act_q = make_calibration(rng, K, 30, 3)
        q = AffineQuantizer(
            scale=float(np.abs(w).max() / 7), zero_point=0, alphabet=Alphabet(4, signed=True)
        )
        budget = AccumulatorBudget.make(7, act_q.alphabet, tile=T)
        codes = gpfq_axe_channel(w, X, Xq, q, budget, soft=True)
        limit = 2 ** (budget.p_bits - 1) - 1
        for s, e in budget.tile_ranges(K):
            tile = codes[s:e]
            assert int(tile[tile > 0].sum()) * (2**3 - 1) <= limit
            assert int(-tile[tile < 0].sum()) * (2**3 - 1) <= limit


class TestMemoryEfficient:
    def test_operands_substitute_exactly(self, rng):
        for _ in range(20):
            K = int(rng.integers(4, 24))
            D = int(rng.integers(K, 3 * K))
            C = int(rng.integers(1, 4))
            W = rng.normal(size=(K, C))
            X, Xq, _ = make_calibration(rng, K, D, 4)
            quantizers = [
                AffineQuantizer(
                    scale=float(max(np.abs(W[:, c]).max(), 1e-9) / 7),
                    zero_point=0,
                    alphabet=Alphabet(4, signed=True),
                )
                for c in range(C)
            ]
            ops = gpfq_memory_efficient_precompute(X, Xq)
            standard = gpfq_layer(W, X, Xq, quantizers)
            reformulated = gpfq_layer(W, ops.g_hinv, ops.h, quantizers)
            assert np.array_equal(standard, reformulated)

    def test_square_root_identity(self, rng):
        X, Xq, _ = make_calibration(rng, 8, 32, 4)
        ops = gpfq_memory_efficient_precompute(X, Xq)
        gram = Xq @ Xq.T
        assert (
            np.linalg.norm(ops.h.T @ ops.h - gram) <= 1e-6 * np.linalg.norm(gram)
        )
        assert np.allclose(ops.h, ops.h.T)
        assert np.all(np.linalg.eigvalsh(ops.h) >= -1e-9)

    def test_orthonormal_identity_case(self, rng):
        K = 6
        Q, _ = np.linalg.qr(rng.normal(size=(K, K)))
        ops = gpfq_memory_efficient_precompute(Q, Q)
        assert np.allclose(ops.h, np.eye(K), atol=1e-10)
        assert np.allclose(ops.g_hinv, Q @ Q.T, atol=1e-10)

    def test_operand_memory_is_k_squared(self, rng):
        K, D, C = 8, 64, 5
        X, Xq, _ = make_calibration(rng, K, D, 4)
        ops = gpfq_memory_efficient_precompute(X, Xq)
        stored = ops.h.size + ops.g_hinv.size
        assert stored == 2 * K * K
        assert stored < D * (2 * K + C)  # the standard path's footprint

    def test_rank_deficient_gram_warns_with_null_dimension(self, rng):
        X = rng.normal(size=(6, 10))
        Xq = X.copy()
        Xq[5] = Xq[4]  # collapse rank by duplicating a row
        Xq[3] = 0.0
        with pytest.warns(RuntimeWarning, match="null-space dimension"):
            gpfq_memory_efficient_precompute(X, Xq)
