"""Greedy path-following quantization, with accumulator-aware variants.

Weights are quantized one input neuron at a time while a running per-sample
error matrix U is corrected forward. The accumulator-aware variant threads
each quantizer argument through a per-channel soft threshold (shrink by the
projection multiplier lambda) and a running-range clip before rounding, all in
integer code units, so the resulting codes provably respect the budget.

The memory-efficient reformulation substitutes (G H^-1, H) for (X, Xq), with
H the PSD square root of Xq Xq^T and G = X Xq^T; both paths produce identical
codes because every quantizer argument is unchanged by the substitution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import AccumulatorBudget, InfeasibleBudgetError
from .numeric import Alphabet, AffineQuantizer, Rounding
from .projection import l1_project, soft_threshold

__all__ = [
    "gpfq_channel",
    "gpfq_axe_channel",
    "gpfq_layer",
    "MemoryEfficientOperands",
    "gpfq_memory_efficient_precompute",
]


def _homogeneous(quantizers: list[AffineQuantizer]) -> tuple[Alphabet, Rounding]:
    alphabet, rounding = quantizers[0].alphabet, quantizers[0].rounding
    for q in quantizers:
        if q.alphabet != alphabet or q.rounding is not rounding:
            raise ValueError("channel quantizers must share alphabet and rounding")
        if q.zero_point != 0:
            raise ValueError("weight quantizers must be symmetric (zero point 0)")
    return alphabet, rounding


def _round_codes(v, alphabet: Alphabet, rounding: Rounding) -> np.ndarray:
    return np.clip(rounding.apply(v), alphabet.lo, alphabet.hi).astype(np.int64)


def _threshold_schedule(T, budget: AccumulatorBudget | None, soft: bool):
    """Per-(tile, channel) soft thresholds from the initial code-unit weights."""
    K, C = T.shape
    ranges = budget.tile_ranges(K) if budget is not None else [(0, K)]
    lam = np.zeros((len(ranges), C))
    if budget is not None and soft:
        for ti, (s, e) in enumerate(ranges):
            for c in range(C):
                lam[ti, c] = l1_project(T[s:e, c], budget.soft_budget).lam
    return ranges, lam


def gpfq_layer(
    W,
    X,
    Xq,
    quantizers: list[AffineQuantizer],
    budget: AccumulatorBudget | None = None,
    soft: bool = True,
    lam: float = 0.0,
    arg_sink: list | None = None,
) -> np.ndarray:
    """Quantize a K x C weight matrix against K x D calibration pairs.

    Without a budget this is plain greedy error-correcting quantization
    (``lam`` > 0 adds the sparse soft-threshold variant). With a budget, each
    argument is soft-thresholded (when ``soft``) and clipped to the remaining
    per-channel range before rounding; running limits are consumed by positive
    codes on the upper side and negative codes on the lower side, per tile
    when the budget is tiled. ``arg_sink`` collects every pre-rounding
    quantizer argument (for rounding-boundary diagnostics).
    """
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Xq = np.asarray(Xq, dtype=np.float64)
    if W.ndim != 2 or X.ndim != 2 or Xq.ndim != 2:
        raise ValueError("W, X, Xq must all be 2-D matrices")
    K, C = W.shape
    if X.shape != Xq.shape or X.shape[0] != K:
        raise ValueError(
            f"calibration shapes must be K x D matching W: W{W.shape}, X{X.shape}, Xq{Xq.shape}"
        )
    if len(quantizers) != C:
        raise ValueError(f"need one quantizer per channel: {len(quantizers)} != {C}")
    alphabet, rounding = _homogeneous(quantizers)
    if budget is not None and budget.limit_pos <= 0:
        raise InfeasibleBudgetError(f"budget admits no positive codes (B={budget.limit_pos})")

    scales = np.array([q.scale for q in quantizers])
    ranges, lam_tiles = _threshold_schedule(W / scales, budget, soft)
    if budget is None and lam > 0.0:
        lam_tiles[:] = lam

    norms = np.einsum("ij,ij->i", Xq, Xq)
    xdot = np.einsum("ij,ij->i", Xq, X)
    U = np.zeros((X.shape[1], C))
    codes = np.zeros((K, C), dtype=np.int64)
    constrained = budget is not None
    shrink = (constrained and soft) or (budget is None and lam > 0.0)

    for ti, (start, end) in enumerate(ranges):
        if constrained:
            a = np.full(C, budget.limit_neg)
            b = np.full(C, budget.limit_pos)
        cur_lam = lam_tiles[ti]
        for i in range(start, end):
            if norms[i] == 0.0:
                continue  # dead input neuron: code 0, error untouched
            v = (Xq[i] @ U + W[i] * xdot[i]) / (norms[i] * scales)
            if shrink:
                v = soft_threshold(v, cur_lam)
            if constrained:
                open_range = a <= b
                v = np.where(open_range, np.clip(v, np.minimum(a, b), b), 0.0)
            if arg_sink is not None:
                arg_sink.append(v.copy())
            q = _round_codes(v, alphabet, rounding)
            codes[i] = q
            if constrained:
                b = b - np.where(q > 0, q, 0)
                a = a - np.where(q < 0, q, 0)
            U += np.outer(X[i], W[i]) - np.outer(Xq[i], scales * q)
    return codes


def gpfq_channel(
    w, X, Xq, quantizer: AffineQuantizer, lam: float = 0.0, arg_sink: list | None = None
) -> np.ndarray:
    """Greedy quantization of a single K-element channel (optionally sparse
    via a fixed soft threshold ``lam``)."""
    w = np.asarray(w, dtype=np.float64)
    codes = gpfq_layer(w[:, None], X, Xq, [quantizer], lam=lam, arg_sink=arg_sink)
    return codes[:, 0]


def gpfq_axe_channel(
    w,
    X,
    Xq,
    quantizer: AffineQuantizer,
    budget: AccumulatorBudget,
    soft: bool = True,
    arg_sink: list | None = None,
) -> np.ndarray:
    """Accumulator-aware greedy quantization of a single channel; the codes
    are guaranteed to satisfy the budget's running-sum limits."""
    w = np.asarray(w, dtype=np.float64)
    codes = gpfq_layer(
        w[:, None], X, Xq, [quantizer], budget=budget, soft=soft, arg_sink=arg_sink
    )
    return codes[:, 0]


@dataclass(frozen=True)
class MemoryEfficientOperands:
    """Square-matrix substitutes for the K x D calibration pair: ``h`` is the
    symmetric PSD square root of Xq Xq^T and ``g_hinv`` is X Xq^T H^-1
    (pseudo-inverse on any null space)."""

    h: np.ndarray
    g_hinv: np.ndarray


def gpfq_memory_efficient_precompute(X, Xq, rank_rtol: float = 1e-12) -> MemoryEfficientOperands:
    """Build the K x K operands whose rows substitute for (X, Xq).

    Feeding ``gpfq_layer(W, g_hinv, h, ...)`` reproduces the standard output
    exactly while storing Theta(K^2) reals instead of Theta(D * (2K + C)).
    """
    X = np.asarray(X, dtype=np.float64)
    Xq = np.asarray(Xq, dtype=np.float64)
    if X.shape != Xq.shape or X.ndim != 2:
        raise ValueError(f"X and Xq must be matching K x D matrices: {X.shape}, {Xq.shape}")
    gram = Xq @ Xq.T
    gram = (gram + gram.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(gram)
    eigvals = np.maximum(eigvals, 0.0)
    keep = eigvals > rank_rtol * max(eigvals[-1], 1.0) if eigvals.size else eigvals > 0
    null_dim = int(np.count_nonzero(~keep))
    if null_dim:
        warnings.warn(
            f"quantized gram matrix is rank deficient (null-space dimension {null_dim}); "
            "substituted operands use the pseudo-inverse",
            RuntimeWarning,
            stacklevel=2,
        )
    sqrt_vals = np.sqrt(eigvals)
    h = (eigvecs * sqrt_vals) @ eigvecs.T
    h = (h + h.T) / 2.0
    inv_sqrt = np.where(keep, 1.0 / np.where(keep, sqrt_vals, 1.0), 0.0)
    h_inv = (eigvecs * inv_sqrt) @ eigvecs.T
    g_hinv = X @ Xq.T @ h_inv
    return MemoryEfficientOperands(h=h, g_hinv=g_hinv)
