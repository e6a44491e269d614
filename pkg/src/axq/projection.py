"""Euclidean projection onto the l1 ball and the projection-based baseline.

The sort-based simplex recipe recovers the Lagrange multiplier
lambda = (1/rho) * (sum of the rho largest magnitudes - Z) and shrinks every
element by it. Projection happens in integer code units (w / scale) so the
ball radius Z shares units with the accumulator budget formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import AccumulatorBudget
from .numeric import AffineQuantizer, Rounding

__all__ = ["ProjectionResult", "l1_project", "soft_threshold", "range_clip", "ep_init"]


@dataclass(frozen=True)
class ProjectionResult:
    projected: np.ndarray  # the minimizer v*
    lam: float  # Lagrange multiplier, 0 iff already inside the ball
    support: int  # number of nonzero elements of v*
    sorted_mags: np.ndarray  # input magnitudes, descending


def l1_project(w, Z: float) -> ProjectionResult:
    """Euclidean projection of ``w`` onto the l1 ball of radius ``Z``.

    Returns the unique minimizer of 0.5 * ||v - w||^2 subject to
    ||v||_1 <= Z, together with the multiplier lambda such that
    v* = sign(w) * max(|w| - lambda, 0). Z = 0 collapses to the zero vector
    with lambda = max |w_i| by convention.
    """
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("projection input must be finite")
    if Z < 0:
        raise ValueError(f"l1 radius must be nonnegative, got {Z}")
    mags = np.abs(w)
    sorted_mags = np.sort(mags)[::-1].copy()
    if mags.sum() <= Z:
        return ProjectionResult(
            projected=w.copy(),
            lam=0.0,
            support=int(np.count_nonzero(w)),
            sorted_mags=sorted_mags,
        )
    if Z == 0.0:
        return ProjectionResult(
            projected=np.zeros_like(w),
            lam=float(sorted_mags[0]) if w.size else 0.0,
            support=0,
            sorted_mags=sorted_mags,
        )
    cumsum = np.cumsum(sorted_mags)
    ranks = np.arange(1, w.size + 1)
    candidate = sorted_mags - (cumsum - Z) / ranks
    rho = int(np.nonzero(candidate > 0)[0][-1]) + 1
    lam = float((cumsum[rho - 1] - Z) / rho)
    projected = soft_threshold(w, lam)
    return ProjectionResult(
        projected=projected,
        lam=lam,
        support=int(np.count_nonzero(projected)),
        sorted_mags=sorted_mags,
    )


def soft_threshold(x, lam):
    """Shrink toward zero: sign(x) * max(|x| - lam, 0). ``lam`` may be a
    scalar or a per-element array of nonnegative thresholds."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0):
        raise ValueError(f"threshold must be nonnegative, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def range_clip(x, a: float, b: float):
    """Clip to the closed interval [a, b]; a > b means the caller's budget is
    exhausted and must be handled before clipping."""
    if a > b:
        raise ValueError(f"empty clip range [{a}, {b}] (budget exhausted)")
    return np.clip(x, a, b)


def ep_init(W, quantizers: list[AffineQuantizer], budget: AccumulatorBudget) -> np.ndarray:
    """Projection-then-round-to-zero baseline for a K x C weight matrix.

    Each channel's code-unit weights are projected onto the l1 ball of radius
    ``budget.soft_budget`` (per tile when the budget is tiled), then quantized
    with round-to-zero. Truncation never increases magnitude, so the integer
    codes satisfy sum |q_i| <= Z exactly.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a K x C weight matrix, got shape {W.shape}")
    K, C = W.shape
    if len(quantizers) != C:
        raise ValueError(f"need one quantizer per channel: {len(quantizers)} != {C}")
    for q in quantizers:
        if q.zero_point != 0 or q.rounding is not Rounding.TO_ZERO:
            raise ValueError("ep_init requires symmetric round-to-zero quantizers")
    codes = np.zeros((K, C), dtype=np.int64)
    for c, q in enumerate(quantizers):
        t = W[:, c] / q.scale
        for s, e in budget.tile_ranges(K):
            projected = l1_project(t[s:e], budget.soft_budget).projected
            codes[s:e, c] = q.quantize_code(projected)
    return codes
