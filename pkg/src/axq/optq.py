"""Per-weight greedy quantization driven by an inverse-Hessian-proxy factor,
plus its accumulator-aware variant.

The Hessian proxy 2 Xq Xq^T is dampened by 1% of its average diagonal,
inverted, and Cholesky-factorized; weights are processed in descending order
of the proxy diagonal and each quantization error is redistributed over the
not-yet-quantized rows through the factor's row. The accumulator-aware path
applies the same soft-threshold and running-range clip as the GPFQ variant,
in code units, with tiles taken as contiguous ranges of the permuted order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bounds import AccumulatorBudget, InfeasibleBudgetError
from .gpfq import _homogeneous, _round_codes, _threshold_schedule
from .numeric import AffineQuantizer
from .projection import soft_threshold

__all__ = ["HessianFactor", "optq_prepare", "optq_quantize_layer", "FactorizationError"]


class FactorizationError(RuntimeError):
    """Hessian proxy could not be inverted/factorized even after dampening."""


@dataclass(frozen=True)
class HessianFactor:
    hinv_chol: np.ndarray  # upper-triangular U with U^T U = (2 Xq Xq^T + eta I)^-1
    perm: np.ndarray  # processing order (descending proxy diagonal, stable)
    eta: float  # dampening added to the proxy diagonal


def optq_prepare(Xq) -> HessianFactor:
    """Build the inverse-proxy Cholesky factor and processing order from the
    quantized calibration matrix."""
    Xq = np.asarray(Xq, dtype=np.float64)
    if Xq.ndim != 2 or Xq.shape[0] < 1:
        raise ValueError(f"expected a K x D matrix with K >= 1, got shape {Xq.shape}")
    proxy = 2.0 * (Xq @ Xq.T)
    diag = np.diag(proxy)
    perm = np.argsort(-diag, kind="stable")
    eta = 0.01 * float(diag.mean())
    damped = proxy[np.ix_(perm, perm)] + eta * np.eye(Xq.shape[0])
    try:
        hinv = np.linalg.inv(damped)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"dampened Hessian proxy is singular (eta={eta:.6g})") from exc
    try:
        hinv_chol = scipy.linalg.cholesky(hinv, lower=False)
    except scipy.linalg.LinAlgError as exc:
        # scipy reports the failing leading minor in its message
        raise FactorizationError(f"Cholesky of inverse proxy failed: {exc}") from exc
    return HessianFactor(hinv_chol=hinv_chol, perm=perm, eta=eta)


def optq_quantize_layer(
    W,
    factor: HessianFactor,
    quantizers: list[AffineQuantizer],
    budget: AccumulatorBudget | None = None,
    soft: bool = True,
    arg_sink: list | None = None,
) -> np.ndarray:
    """Quantize a K x C weight matrix in the factor's permuted order.

    Each step quantizes row i (optionally soft-thresholded and clipped to the
    remaining budget range, in code units), computes the error against the
    pre-projection weight, and spreads it over rows > i via the factor's
    upper-triangular row. Output codes are returned in the original row order.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a K x C weight matrix, got shape {W.shape}")
    K, C = W.shape
    if factor.hinv_chol.shape != (K, K):
        raise ValueError(
            f"factor built for K={factor.hinv_chol.shape[0]} but W has K={K} rows"
        )
    if len(quantizers) != C:
        raise ValueError(f"need one quantizer per channel: {len(quantizers)} != {C}")
    alphabet, rounding = _homogeneous(quantizers)
    if budget is not None and budget.limit_pos <= 0:
        raise InfeasibleBudgetError(f"budget admits no positive codes (B={budget.limit_pos})")

    scales = np.array([q.scale for q in quantizers])
    U = factor.hinv_chol
    T = W[factor.perm] / scales  # code units, permuted processing order
    ranges, lam_tiles = _threshold_schedule(T, budget, soft)
    codes_p = np.zeros((K, C), dtype=np.int64)
    constrained = budget is not None

    for ti, (start, end) in enumerate(ranges):
        if constrained:
            a = np.full(C, budget.limit_neg)
            b = np.full(C, budget.limit_pos)
        cur_lam = lam_tiles[ti]
        for i in range(start, end):
            v = T[i]
            if constrained:
                if soft:
                    v = soft_threshold(v, cur_lam)
                open_range = a <= b
                v = np.where(open_range, np.clip(v, np.minimum(a, b), b), 0.0)
            if arg_sink is not None:
                arg_sink.append(np.asarray(v, dtype=np.float64).copy())
            q = _round_codes(v, alphabet, rounding)
            codes_p[i] = q
            err = (T[i] - q) / U[i, i]
            if i + 1 < K:
                T[i + 1 :] -= np.outer(U[i, i + 1 :], err)
            if constrained:
                b = b - np.where(q > 0, q, 0)
                a = a - np.where(q < 0, q, 0)
    codes = np.empty_like(codes_p)
    codes[factor.perm] = codes_p
    return codes
