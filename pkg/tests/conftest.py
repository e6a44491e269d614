"""Shared helpers for building random calibration pairs and layers."""

import numpy as np
import pytest

from axq.numeric import calibrate_activations, weight_quantizers


def make_calibration(rng, K, D, act_bits, percentile=100.0, nonneg=True):
    """Random activations plus their calibrated quantizer and fake-quantized
    counterpart."""
    X = rng.normal(size=(K, D))
    if nonneg:
        X = np.abs(X)
    act_q = calibrate_activations(X, act_bits, percentile)
    Xq = act_q.dequantize(act_q.quantize(X))
    return X, Xq, act_q


def make_layer(rng, K, C, D, weight_bits, act_bits, rounding=None):
    """Random layer: weights, quantizers, calibration pair."""
    W = rng.normal(size=(K, C))
    kwargs = {} if rounding is None else {"rounding": rounding}
    quantizers, _ = weight_quantizers(W, weight_bits, **kwargs)
    X, Xq, act_q = make_calibration(rng, K, D, act_bits)
    return W, quantizers, X, Xq, act_q


def correlated_activations(rng, K, D, rho=0.7):
    """Activations with AR(1) correlation across the K input neurons,
    rectified to a nonnegative range."""
    idx = np.arange(K)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    L = np.linalg.cholesky(cov + 1e-9 * np.eye(K))
    return np.maximum(L @ rng.normal(size=(K, D)), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
