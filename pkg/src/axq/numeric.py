"""Integer alphabets, rounding modes, and affine quantizers.

Weights are quantized symmetrically (zero point 0) with a per-channel scale;
activations asymmetrically (per-tensor scale, integer zero point picked from a
low percentile of the calibration data). All quantizers map reals to integer
codes such that dequantization is ``scale * code``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Alphabet",
    "Rounding",
    "AffineQuantizer",
    "compute_scale",
    "weight_quantizers",
    "calibrate_activations",
]


@dataclass(frozen=True)
class Alphabet:
    """The set of integer codes representable at ``bits`` bits.

    Signed alphabets are symmetric sign-magnitude by default,
    {-(2^(b-1)-1), ..., 2^(b-1)-1}; ``twos_complement=True`` widens the
    negative end to -2^(b-1) (the full data-type range of a standard signed
    integer). Unsigned alphabets span {0, ..., 2^b - 1}. Zero is always
    representable.
    """

    bits: int
    signed: bool
    twos_complement: bool = False

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"alphabet needs at least 1 bit, got {self.bits}")
        if self.twos_complement and not self.signed:
            raise ValueError("twos_complement only applies to signed alphabets")

    @property
    def lo(self) -> int:
        if not self.signed:
            return 0
        if self.twos_complement:
            return -(2 ** (self.bits - 1))
        return -(2 ** (self.bits - 1) - 1)

    @property
    def hi(self) -> int:
        if self.signed:
            return 2 ** (self.bits - 1) - 1
        return 2**self.bits - 1


class Rounding(enum.Enum):
    """Rounding rule applied to scaled values before clipping.

    ``NEAREST`` rounds to the nearest integer with ties away from zero, so the
    worst-case magnitude error (``slack``) is exactly 0.5. ``TO_ZERO``
    truncates toward zero, never increasing magnitude (slack 0).
    """

    NEAREST = "nearest"
    TO_ZERO = "to-zero"

    @property
    def slack(self) -> float:
        return 0.5 if self is Rounding.NEAREST else 0.0

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self is Rounding.NEAREST:
            return np.copysign(np.floor(np.abs(x) + 0.5), x)
        return np.trunc(x)


@dataclass(frozen=True)
class AffineQuantizer:
    """Uniform quantizer with strictly positive scale and integer zero point.

    ``quantize`` returns integer codes in ``[lo - z, hi - z]``; the
    dequantized value of a code is ``scale * code``, so re-quantizing a
    dequantized value returns the same code.
    """

    scale: float
    zero_point: int
    alphabet: Alphabet
    rounding: Rounding = Rounding.NEAREST

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"scale must be strictly positive, got {self.scale}")
        if not self.alphabet.lo <= self.zero_point <= self.alphabet.hi:
            raise ValueError(
                f"zero point {self.zero_point} outside alphabet "
                f"[{self.alphabet.lo}, {self.alphabet.hi}]"
            )

    @property
    def code_min(self) -> int:
        return self.alphabet.lo - self.zero_point

    @property
    def code_max(self) -> int:
        return self.alphabet.hi - self.zero_point

    def quantize(self, w):
        """Map finite reals to integer codes (scalar in, scalar out)."""
        arr = np.asarray(w, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("quantize requires finite input values")
        codes = self.quantize_code(arr / self.scale)
        if np.isscalar(w) or arr.ndim == 0:
            return int(codes)
        return codes

    def quantize_code(self, v):
        """Quantize values already expressed in code units (w / scale)."""
        v = np.asarray(v, dtype=np.float64)
        shifted = self.rounding.apply(v) + self.zero_point
        clipped = np.clip(shifted, self.alphabet.lo, self.alphabet.hi)
        return (clipped - self.zero_point).astype(np.int64)

    def dequantize(self, code):
        return self.scale * np.asarray(code, dtype=np.float64)


def compute_scale(w_row, alphabet: Alphabet) -> float:
    """Per-channel weight scale, max |w| / (2^(b-1) - 1).

    An all-zero row would give scale 0; it falls back to 1.0 so the channel
    quantizes to all-zero codes without dividing by zero.
    """
    w_row = np.asarray(w_row, dtype=np.float64)
    if w_row.size == 0:
        raise ValueError("cannot compute a scale for an empty weight row")
    if not alphabet.signed:
        raise ValueError("weight alphabets must be signed")
    if alphabet.hi == 0:
        raise ValueError(f"{alphabet.bits}-bit signed alphabet has no nonzero codes")
    m = float(np.max(np.abs(w_row)))
    if m == 0.0:
        return 1.0
    return m / alphabet.hi


def weight_quantizers(
    W, bits: int, rounding: Rounding = Rounding.NEAREST
) -> tuple[list[AffineQuantizer], np.ndarray]:
    """Symmetric per-channel quantizers for a K x C weight matrix.

    Returns one quantizer per output channel (column) plus a boolean mask
    flagging degenerate all-zero channels that received the fallback scale.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a K x C weight matrix, got shape {W.shape}")
    alphabet = Alphabet(bits=bits, signed=True)
    quantizers = []
    degenerate = np.zeros(W.shape[1], dtype=bool)
    for c in range(W.shape[1]):
        degenerate[c] = not np.any(W[:, c])
        scale = compute_scale(W[:, c], alphabet)
        quantizers.append(
            AffineQuantizer(scale=scale, zero_point=0, alphabet=alphabet, rounding=rounding)
        )
    return quantizers, degenerate


def calibrate_activations(X, bits: int, percentile: float = 99.0) -> AffineQuantizer:
    """Asymmetric unsigned activation quantizer from calibration samples.

    The observed range is clipped to [100-percentile, percentile] (linear
    interpolation between order statistics); the clipped range drives both the
    per-tensor scale and the zero point, which is placed so the low end maps
    to code 0. Codes span [0, 2^bits - 1] before the zero-point shift.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ValueError("calibration data must be non-empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("calibration data must be finite")
    if not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    alphabet = Alphabet(bits=bits, signed=False)
    lo = float(np.percentile(X, 100.0 - percentile))
    hi = float(np.percentile(X, percentile))
    if hi > lo:
        scale = (hi - lo) / alphabet.hi
    else:
        scale = 1.0  # constant input, same fallback as compute_scale
    z = int(np.clip(Rounding.NEAREST.apply(-lo / scale), alphabet.lo, alphabet.hi))
    return AffineQuantizer(scale=scale, zero_point=z, alphabet=alphabet)
