"""Closed-form accumulator bit-width and budget formulas.

All budgets are expressed in integer weight-code units: an unsigned N-bit
activation contributes at most (2^N - 1) per unit of weight code, so dividing
the accumulator's representable range by (2^N - 1) converts register headroom
into a cap on running sums of weight codes. Bit-width formulas are evaluated
in exact integer arithmetic; the +1 terms inside the ceilings change results
below double-precision log resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

from .numeric import Alphabet

__all__ = [
    "InfeasibleBudgetError",
    "min_accumulator_bits",
    "l1_budget",
    "strict_limits",
    "outer_accumulator_bits",
    "AccumulatorBudget",
]


class InfeasibleBudgetError(ValueError):
    """The accumulator budget admits no nonzero weight code."""


def min_accumulator_bits(K: int, M: int, N: int, signed_acts: bool) -> int:
    """Conservative data-type bound on the accumulator width for a K-deep
    dot product of M-bit weights with N-bit activations.

    Exact-integer evaluation of ceil(log2(K * 2^(N+M-1-signed) + 1) + 1).
    """
    if K < 1 or M < 1 or N < 1:
        raise ValueError(f"K, M, N must all be >= 1, got {(K, M, N)}")
    worst = K << (N + M - 1 - (1 if signed_acts else 0))
    return worst.bit_length() + 1


def l1_budget(P: int, N: int) -> float:
    """Soft l1 cap (2^P - 2)/(2^N - 1) on integer weight codes for a signed
    P-bit accumulator (sufficient under zero-centering; used as a soft target
    only)."""
    if P < 2:
        raise ValueError(f"accumulator bits must be >= 2, got {P}")
    if N < 1:
        raise ValueError(f"activation bits must be >= 1, got {N}")
    return (2**P - 2) / (2**N - 1)


def strict_limits(
    P: int, N: int, slack: float, twos_complement: bool = False
) -> tuple[float, float]:
    """Greedy running-sum limits (A, B) for negative/positive code sums.

    B = (2^(P-1) - 1)/(2^N - 1) - slack, A = -B for the default
    sign-magnitude register. A two's-complement register widens the negative
    limit by one register unit, making A asymmetric.
    """
    if P < 2:
        raise ValueError(f"accumulator bits must be >= 2, got {P}")
    if N < 1:
        raise ValueError(f"activation bits must be >= 1, got {N}")
    if slack not in (0.0, 0.5):
        raise ValueError(f"slack must be 0 or 0.5, got {slack}")
    denom = 2**N - 1
    b = (2 ** (P - 1) - 1) / denom - slack
    if b <= 0:
        raise InfeasibleBudgetError(
            f"P={P}, N={N}, slack={slack} leaves no room for nonzero codes (B={b:.6g})"
        )
    a = -(2 ** (P - 1) / denom - slack) if twos_complement else -b
    return a, b


def outer_accumulator_bits(P_I: int, K: int, T: int) -> int:
    """Outer accumulator width ceil(P_I + log2(K) - log2(T)) for a K-deep dot
    product computed in T-element tiles, evaluated exactly."""
    if not 1 <= T <= K:
        raise ValueError(f"tile size must satisfy 1 <= T <= K, got T={T}, K={K}")
    extra = 0
    while (T << extra) < K:
        extra += 1
    return P_I + extra


@dataclass(frozen=True)
class AccumulatorBudget:
    """Resolved budget for one target accumulator.

    ``p_bits`` is the monolithic width P, or the inner width P_I when ``tile``
    is set (limits then apply per tile). ``limit_neg``/``limit_pos`` are the
    strict greedy caps A/B; ``soft_budget`` is the l1 target Z.
    """

    p_bits: int
    act_alphabet: Alphabet
    slack: float
    limit_neg: float
    limit_pos: float
    soft_budget: float
    tile: int | None = None
    twos_complement: bool = False

    @classmethod
    def make(
        cls,
        p_bits: int,
        act_alphabet: Alphabet,
        slack: float = 0.5,
        tile: int | None = None,
        twos_complement: bool = False,
    ) -> "AccumulatorBudget":
        if tile is not None and tile < 1:
            raise ValueError(f"tile size must be >= 1, got {tile}")
        a, b = strict_limits(p_bits, act_alphabet.bits, slack, twos_complement)
        z = l1_budget(p_bits, act_alphabet.bits)
        return cls(
            p_bits=p_bits,
            act_alphabet=act_alphabet,
            slack=slack,
            limit_neg=a,
            limit_pos=b,
            soft_budget=z,
            tile=tile,
            twos_complement=twos_complement,
        )

    def tile_ranges(self, K: int) -> list[tuple[int, int]]:
        """Contiguous [start, end) index ranges covered by each accumulator
        unit; a single range when monolithic. Tail tiles keep the same
        limits (fewer addends only shrink the range)."""
        if self.tile is None:
            return [(0, K)]
        return [(s, min(s + self.tile, K)) for s in range(0, K, self.tile)]

    def to_dict(self) -> dict:
        return {
            "p_bits": self.p_bits,
            "act_bits": self.act_alphabet.bits,
            "act_signed": self.act_alphabet.signed,
            "slack": self.slack,
            "limit_neg": self.limit_neg,
            "limit_pos": self.limit_pos,
            "soft_budget": self.soft_budget,
            "tile": self.tile,
            "twos_complement": self.twos_complement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AccumulatorBudget":
        return cls(
            p_bits=d["p_bits"],
            act_alphabet=Alphabet(bits=d["act_bits"], signed=d["act_signed"]),
            slack=d["slack"],
            limit_neg=d["limit_neg"],
            limit_pos=d["limit_pos"],
            soft_budget=d["soft_budget"],
            tile=d.get("tile"),
            twos_complement=d.get("twos_complement", False),
        )
