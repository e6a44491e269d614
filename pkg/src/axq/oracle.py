"""Independent overflow verification with exact integer arithmetic.

Nothing here touches floating point: dot-product extremes are built from the
per-element worst-case inputs and summed as arbitrary-precision Python
integers, so a passing certificate is a proof, not an estimate. The register
model is sign-magnitude: a P-bit unit holds values in [-(2^(P-1)-1),
2^(P-1)-1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bounds import AccumulatorBudget
from .numeric import Alphabet

__all__ = [
    "ExtremeInputs",
    "UnitCheck",
    "OverflowCertificate",
    "extreme_inputs",
    "verify",
    "simulate_accumulate",
    "brute_force_min_bits",
]


@dataclass(frozen=True)
class ExtremeInputs:
    """Activation code vectors maximizing / minimizing the dot product with a
    fixed weight code vector, per element: the box corner selected by the
    weight's sign."""

    u: list[int]
    v: list[int]

    def max_dot(self, q) -> int:
        return sum(int(ui) * int(qi) for ui, qi in zip(self.u, q))

    def min_dot(self, q) -> int:
        return sum(int(vi) * int(qi) for vi, qi in zip(self.v, q))


def extreme_inputs(q, act_alphabet: Alphabet) -> ExtremeInputs:
    """Worst-case activation vectors over the alphabet box [lo, hi]."""
    mu, nu = act_alphabet.lo, act_alphabet.hi
    u = [nu if int(qi) >= 0 else mu for qi in q]
    v = [mu if int(qi) >= 0 else nu for qi in q]
    return ExtremeInputs(u=u, v=v)


def _required_bits(max_dot: int, min_dot: int) -> int:
    """Smallest sign-magnitude width holding both extremes (floor 2)."""
    magnitude = max(abs(max_dot), abs(min_dot))
    p = 2
    while magnitude > 2 ** (p - 1) - 1:
        p += 1
    return p


@dataclass(frozen=True)
class UnitCheck:
    channel: int
    tile: int | None
    max_dot: int
    min_dot: int
    required_bits: int
    ok: bool

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "tile": self.tile,
            "max_dot": self.max_dot,
            "min_dot": self.min_dot,
            "required_bits": self.required_bits,
            "pass": self.ok,
        }


@dataclass(frozen=True)
class OverflowCertificate:
    """Machine-checkable record of exact extreme dot products per
    channel (and per tile when the budget is tiled)."""

    budget: AccumulatorBudget
    per_unit: list[UnitCheck] = field(default_factory=list)
    perm: list[int] | None = None

    @property
    def passed(self) -> bool:
        return all(unit.ok for unit in self.per_unit)

    def to_dict(self) -> dict:
        return {
            "budget": self.budget.to_dict(),
            "perm": self.perm,
            "per_unit": [unit.to_dict() for unit in self.per_unit],
            "pass": self.passed,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "OverflowCertificate":
        units = [
            UnitCheck(
                channel=u["channel"],
                tile=u["tile"],
                max_dot=u["max_dot"],
                min_dot=u["min_dot"],
                required_bits=u["required_bits"],
                ok=u["pass"],
            )
            for u in d["per_unit"]
        ]
        return cls(
            budget=AccumulatorBudget.from_dict(d["budget"]),
            per_unit=units,
            perm=d.get("perm"),
        )

    @classmethod
    def from_json(cls, s: str) -> "OverflowCertificate":
        return cls.from_dict(json.loads(s))


def verify(Q, budget: AccumulatorBudget, perm=None) -> OverflowCertificate:
    """Exact-integer overflow check of a K x C code matrix against a budget.

    When ``perm`` is given (codes produced in a permuted processing order),
    tiles are taken as contiguous ranges of that order. Failures are recorded
    in the certificate, not raised.
    """
    Q = np.asarray(Q)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.ndim != 2:
        raise ValueError(f"expected a K x C code matrix, got shape {Q.shape}")
    K, C = Q.shape
    rows = Q[np.asarray(perm)] if perm is not None else Q
    limit = 2 ** (budget.p_bits - 1) - 1
    tiles = budget.tile_ranges(K)
    units = []
    for c in range(C):
        col = [int(x) for x in rows[:, c]]
        for ti, (s, e) in enumerate(tiles):
            ext = extreme_inputs(col[s:e], budget.act_alphabet)
            mx = ext.max_dot(col[s:e])
            mn = ext.min_dot(col[s:e])
            units.append(
                UnitCheck(
                    channel=c,
                    tile=ti if budget.tile is not None else None,
                    max_dot=mx,
                    min_dot=mn,
                    required_bits=_required_bits(mx, mn),
                    ok=mx <= limit and -mn <= limit,
                )
            )
    perm_list = [int(p) for p in perm] if perm is not None else None
    return OverflowCertificate(budget=budget, per_unit=units, perm=perm_list)


def simulate_accumulate(q, x, P: int, semantics: str = "exact") -> tuple[int, bool]:
    """Sequentially accumulate elementwise products in a simulated P-bit
    register.

    ``exact`` reports the true value plus whether any prefix sum left the
    sign-magnitude range; ``saturate`` clamps each prefix to that range;
    ``wraparound`` wraps each prefix into the two's-complement range
    [-2^(P-1), 2^(P-1)-1] (how overflow typically manifests in hardware).
    Returns (final register value, overflow flag).
    """
    if P < 2:
        raise ValueError(f"register width must be >= 2 bits, got {P}")
    if len(q) != len(x):
        raise ValueError(f"operand lengths differ: {len(q)} != {len(x)}")
    if semantics not in ("exact", "saturate", "wraparound"):
        raise ValueError(f"unknown accumulator semantics: {semantics!r}")
    limit = 2 ** (P - 1) - 1
    span = 2**P
    acc = 0
    overflowed = False
    for qi, xi in zip(q, x):
        acc += int(qi) * int(xi)
        if semantics == "exact":
            if abs(acc) > limit:
                overflowed = True
        elif semantics == "saturate":
            if acc > limit:
                acc, overflowed = limit, True
            elif acc < -limit:
                acc, overflowed = -limit, True
        else:  # wraparound
            wrapped = (acc + span // 2) % span - span // 2
            if wrapped != acc:
                overflowed = True
            acc = wrapped
    return acc, overflowed


def brute_force_min_bits(q, act_alphabet: Alphabet) -> int:
    """Minimal sign-magnitude register width such that every activation
    vector in the alphabet box keeps the dot product in range. Exact by
    linearity: the extremes over the box are attained at per-element
    corners."""
    ext = extreme_inputs(q, act_alphabet)
    return _required_bits(ext.max_dot(q), ext.min_dot(q))
