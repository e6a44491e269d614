import numpy as np
import pytest

from axq.bounds import AccumulatorBudget
from axq.numeric import AffineQuantizer, Alphabet
from axq.optq import FactorizationError, optq_prepare, optq_quantize_layer
from axq.oracle import verify
from conftest import make_calibration, make_layer


class TestPrepare:
    def test_identity_proxy_closed_form(self):
        K = 5
        Xq = np.sqrt(0.5) * np.eye(K)  # proxy = 2 Xq Xq^T = I
        factor = optq_prepare(Xq)
        assert factor.eta == pytest.approx(0.01)
        np.testing.assert_allclose(np.diag(factor.hinv_chol), 1 / np.sqrt(1.01))
        assert np.array_equal(factor.perm, np.arange(K))  # stable on constant diag

    def test_zero_activations_fail(self):
        with pytest.raises(FactorizationError):
            optq_prepare(np.zeros((4, 8)))

    def test_factor_reconstructs_inverse(self, rng):
        X, Xq, _ = make_calibration(rng, 16, 64, 4)
        factor = optq_prepare(Xq)
        proxy = 2 * Xq @ Xq.T
        damped = proxy[np.ix_(factor.perm, factor.perm)] + factor.eta * np.eye(16)
        recon = factor.hinv_chol.T @ factor.hinv_chol
        np.testing.assert_allclose(recon, np.linalg.inv(damped), rtol=1e-8, atol=1e-10)
        assert np.all(np.diag(factor.hinv_chol) > 0)
        assert np.allclose(factor.hinv_chol, np.triu(factor.hinv_chol))

    def test_permutation_sorts_diagonal_descending(self, rng):
        _, Xq, _ = make_calibration(rng, 12, 40, 4)
        factor = optq_prepare(Xq)
        diag = np.diag(2 * Xq @ Xq.T)
        assert np.all(np.diff(diag[factor.perm]) <= 1e-12)


class TestQuantizeLayer:
    def test_grid_weights_pass_through(self, rng):
        K, C = 10, 3
        hi = 7
        codes_in = rng.integers(-hi, hi + 1, size=(K, C))
        W = codes_in * 0.125
        _, Xq, _ = make_calibration(rng, K, 24, 4)
        factor = optq_prepare(Xq)
        quantizers = [
            AffineQuantizer(scale=0.125, zero_point=0, alphabet=Alphabet(4, signed=True))
            for _ in range(C)
        ]
        codes = optq_quantize_layer(W, factor, quantizers)
        assert np.array_equal(codes, codes_in)

    def test_huge_budget_identical_to_unconstrained(self, rng):
        W, quantizers, X, Xq, act_q = make_layer(rng, 16, 4, 48, 4, 6)
        factor = optq_prepare(Xq)
        base = optq_quantize_layer(W, factor, quantizers)
        budget = AccumulatorBudget.make(32, act_q.alphabet)
        axe = optq_quantize_layer(W, factor, quantizers, budget=budget, soft=True)
        assert np.array_equal(base, axe)

    def test_constrained_run_passes_oracle_and_differs_when_binding(self, rng):
        W, quantizers, X, Xq, act_q = make_layer(rng, 16, 4, 48, 4, 4)
        W = W * 3.0
        quantizers = [
            AffineQuantizer(scale=q.scale * 3.0, zero_point=0, alphabet=q.alphabet)
            for q in quantizers
        ]
        factor = optq_prepare(Xq)
        base = optq_quantize_layer(W, factor, quantizers)
        budget = AccumulatorBudget.make(9, act_q.alphabet)
        axe = optq_quantize_layer(W, factor, quantizers, budget=budget, soft=True)
        cert = verify(axe, budget, perm=factor.perm)
        assert cert.passed
        assert not verify(base, budget, perm=factor.perm).passed  # budget binds
        assert not np.array_equal(base, axe)

    def test_quantized_rows_never_revisited(self, rng):
        # error update only touches rows after i: quantizing a prefix of the
        # permuted order yields the same codes for that prefix
        W, quantizers, X, Xq, _ = make_layer(rng, 12, 2, 30, 4, 4)
        factor = optq_prepare(Xq)
        sink_full = []
        optq_quantize_layer(W, factor, quantizers, arg_sink=sink_full)
        sink_again = []
        optq_quantize_layer(W, factor, quantizers, arg_sink=sink_again)
        for a, b in zip(sink_full, sink_again):
            assert np.array_equal(a, b)

    def test_tiled_budget_respected_in_permuted_order(self, rng):
        K, C, T = 18, 3, 5
        W, quantizers, X, Xq, act_q = make_layer(rng, K, C, 36, 4, 3)
        W = W * 4.0
        quantizers = [
            AffineQuantizer(scale=q.scale * 4.0, zero_point=0, alphabet=q.alphabet)
            for q in quantizers
        ]
        factor = optq_prepare(Xq)
        budget = AccumulatorBudget.make(7, act_q.alphabet, tile=T)
        codes = optq_quantize_layer(W, factor, quantizers, budget=budget, soft=True)
        cert = verify(codes, budget, perm=factor.perm)
        assert cert.passed
        # spot-check one tile in exact integers, in permuted order
        limit = 2 ** (budget.p_bits - 1) - 1
        permuted = codes[factor.perm]
        for s, e in budget.tile_ranges(K):
            for c in range(C):
                tile = permuted[s:e, c]
                assert int(tile[tile > 0].sum()) * (2**3 - 1) <= limit
                assert int(-tile[tile < 0].sum()) * (2**3 - 1) <= limit

    def test_dimension_mismatch_raises(self, rng):
        _, Xq, _ = make_calibration(rng, 8, 16, 4)
        factor = optq_prepare(Xq)
        q = AffineQuantizer(scale=1.0, zero_point=0, alphabet=Alphabet(4, signed=True))
        with pytest.raises(ValueError):
            optq_quantize_layer(np.ones((9, 1)), factor, [q])
        with pytest.raises(ValueError):
            optq_quantize_layer(np.ones((8, 2)), factor, [q])
