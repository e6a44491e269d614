"""Layer-wise quantization driver: calibration, dispatch, verification,
reporting, and configuration sweeps.

A job quantizes one layer (K x C weights against a K x D calibration matrix).
Multi-layer networks are driven externally by feeding per-layer calibration
pairs; this module deliberately knows nothing about model graphs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gpfq, optq
from .bounds import AccumulatorBudget, InfeasibleBudgetError
from .numeric import Rounding, calibrate_activations, weight_quantizers
from .oracle import OverflowCertificate, verify
from .projection import ep_init

__all__ = [
    "QuantConfig",
    "LayerJob",
    "LayerReport",
    "SweepRow",
    "quantize_layer",
    "reconstruction_error",
    "sweep",
    "pareto_front",
    "write_sweep_csv",
]

ALGORITHMS = ("gpfq", "optq")
VARIANTS = ("base", "ep-init", "axe")
ROUNDINGS = {"nearest": Rounding.NEAREST, "to-zero": Rounding.TO_ZERO}


@dataclass(frozen=True)
class QuantConfig:
    """One quantization configuration: bit widths M/N/P, tile size, algorithm,
    variant, rounding, soft-constraint flag, and calibration percentile."""

    weight_bits: int
    act_bits: int
    acc_bits: int | None = None
    tile: int | None = None
    algorithm: str = "gpfq"
    variant: str = "base"
    rounding: str = "nearest"
    soft_constraint: bool = True
    percentile: float = 99.0

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}, expected {ALGORITHMS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected {VARIANTS}")
        if self.rounding not in ROUNDINGS:
            raise ValueError(f"unknown rounding {self.rounding!r}, expected nearest/to-zero")
        if self.weight_bits < 2:
            raise ValueError(f"weight_bits must be >= 2, got {self.weight_bits}")
        if self.act_bits < 1:
            raise ValueError(f"act_bits must be >= 1, got {self.act_bits}")
        if self.acc_bits is not None and self.acc_bits < 2:
            raise ValueError(f"acc_bits must be >= 2, got {self.acc_bits}")
        if self.tile is not None and self.tile < 1:
            raise ValueError(f"tile must be >= 1, got {self.tile}")
        if not 0.0 < self.percentile <= 100.0:
            raise ValueError(f"percentile must be in (0, 100], got {self.percentile}")
        if self.variant in ("ep-init", "axe") and self.acc_bits is None:
            raise ValueError(f"variant {self.variant!r} requires acc_bits")

    def to_dict(self) -> dict:
        return {
            "weight_bits": self.weight_bits,
            "act_bits": self.act_bits,
            "acc_bits": self.acc_bits,
            "tile": self.tile,
            "algorithm": self.algorithm,
            "variant": self.variant,
            "rounding": self.rounding,
            "soft_constraint": self.soft_constraint,
            "percentile": self.percentile,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class LayerJob:
    weights: np.ndarray  # K x C
    calib: np.ndarray  # K x D float activations
    config: QuantConfig


@dataclass(frozen=True)
class LayerReport:
    recon_error: float
    sparsity: float
    certificate: OverflowCertificate | None
    config: QuantConfig

    def to_dict(self) -> dict:
        return {
            "recon_error": self.recon_error,
            "sparsity": self.sparsity,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "config": self.config.to_dict(),
        }


def reconstruction_error(W, X, Xq, codes, scales) -> float:
    """Layer objective 0.5 * ||X^T W - Xq^T (scales * codes)||_F^2 summed over
    channels."""
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Xq = np.asarray(Xq, dtype=np.float64)
    deq = np.asarray(codes, dtype=np.float64) * np.asarray(scales, dtype=np.float64)
    if W.shape != deq.shape or X.shape != Xq.shape or X.shape[0] != W.shape[0]:
        raise ValueError(
            f"shape mismatch: W{W.shape}, codes{deq.shape}, X{X.shape}, Xq{Xq.shape}"
        )
    resid = X.T @ W - Xq.T @ deq
    return 0.5 * float(np.sum(resid * resid))


def quantize_layer(job: LayerJob) -> tuple[np.ndarray, LayerReport]:
    """Calibrate, dispatch to the configured algorithm/variant, verify, and
    report. Returns the K x C integer code matrix and the layer report."""
    cfg = job.config
    cfg.validate()
    W = np.asarray(job.weights, dtype=np.float64)
    X = np.asarray(job.calib, dtype=np.float64)
    if W.ndim != 2 or X.ndim != 2:
        raise ValueError(f"weights and calib must be 2-D, got {W.shape} and {X.shape}")
    if W.shape[0] != X.shape[0]:
        raise ValueError(f"weights K={W.shape[0]} does not match calib K={X.shape[0]}")
    rounding = ROUNDINGS[cfg.rounding]

    quantizers, _ = weight_quantizers(W, cfg.weight_bits, rounding)
    scales = np.array([q.scale for q in quantizers])
    act_q = calibrate_activations(X, cfg.act_bits, cfg.percentile)
    Xq = act_q.dequantize(act_q.quantize(X))

    budget = None
    if cfg.acc_bits is not None:
        budget = AccumulatorBudget.make(
            cfg.acc_bits, act_q.alphabet, slack=rounding.slack, tile=cfg.tile
        )

    perm = None
    if cfg.algorithm == "optq":
        factor = optq.optq_prepare(Xq)
        if cfg.variant == "axe":
            codes = optq.optq_quantize_layer(
                W, factor, quantizers, budget=budget, soft=cfg.soft_constraint
            )
            perm = factor.perm
        else:
            codes = optq.optq_quantize_layer(W, factor, quantizers)
    else:
        if cfg.variant == "axe":
            codes = gpfq.gpfq_layer(W, X, Xq, quantizers, budget=budget, soft=cfg.soft_constraint)
        else:
            codes = gpfq.gpfq_layer(W, X, Xq, quantizers)

    if cfg.variant == "ep-init":
        # projection baseline runs after the base algorithm (no bias
        # correction in this pipeline); the final rounding is to-zero
        rtz = [replace(q, rounding=Rounding.TO_ZERO) for q in quantizers]
        codes = ep_init(scales * codes, rtz, budget)
        perm = None  # projection works per channel in natural order

    certificate = None
    if cfg.variant in ("ep-init", "axe"):
        certificate = verify(codes, budget, perm=perm)

    report = LayerReport(
        recon_error=reconstruction_error(W, X, Xq, codes, scales),
        sparsity=float(np.mean(codes == 0)),
        certificate=certificate,
        config=cfg,
    )
    return codes, report


@dataclass(frozen=True)
class SweepRow:
    p_bits: int
    weight_bits: int
    act_bits: int
    recon_error: float  # NaN when the cell failed
    sparsity: float
    ok: bool
    error: str = ""
    pareto: bool = field(default=False, compare=False)

    def to_csv_row(self) -> list:
        recon = "" if math.isnan(self.recon_error) else repr(self.recon_error)
        spars = "" if math.isnan(self.sparsity) else repr(self.sparsity)
        return [self.p_bits, self.weight_bits, self.act_bits, recon, spars, self.ok]


def _validate_sweep_grid(m_values, n_values, p_values) -> None:
    for m in m_values:
        if not 3 <= m <= 8:
            raise ValueError(f"sweep weight_bits must be in [3, 8], got {m}")
    for n in n_values:
        if not n <= 8:
            raise ValueError(f"sweep act_bits must be <= 8, got {n}")
    for p in p_values:
        if p < 2:
            raise ValueError(f"sweep acc_bits must be >= 2, got {p}")


def sweep(weights, calib, m_values, n_values, p_values, base: QuantConfig) -> list[SweepRow]:
    """Run every (M, N, P) combination with N >= M; per-cell failures are
    recorded in the row and do not stop the sweep. Rows on the Pareto front
    (no passing row with both smaller-or-equal P and recon error) are
    flagged."""
    _validate_sweep_grid(m_values, n_values, p_values)
    rows = []
    for p in p_values:
        for m in m_values:
            for n in n_values:
                if n < m:
                    continue  # sweep space is restricted to N >= M
                cfg = replace(base, weight_bits=m, act_bits=n, acc_bits=p)
                try:
                    codes, report = quantize_layer(LayerJob(weights, calib, cfg))
                    ok = report.certificate.passed if report.certificate else True
                    rows.append(
                        SweepRow(p, m, n, report.recon_error, report.sparsity, ok)
                    )
                except (InfeasibleBudgetError, optq.FactorizationError, ValueError) as exc:
                    rows.append(SweepRow(p, m, n, math.nan, math.nan, False, error=str(exc)))
    front = pareto_front(rows)
    return [replace(r, pareto=(r in front)) for r in rows]


def pareto_front(rows: list[SweepRow]) -> list[SweepRow]:
    """Passing rows not dominated by another passing row with P <= and recon
    error <= (one strict)."""
    passing = [r for r in rows if r.ok and not math.isnan(r.recon_error)]
    front = []
    for r in passing:
        dominated = any(
            (o.p_bits <= r.p_bits and o.recon_error <= r.recon_error)
            and (o.p_bits < r.p_bits or o.recon_error < r.recon_error)
            for o in passing
        )
        if not dominated:
            front.append(r)
    return front


def write_sweep_csv(rows: list[SweepRow], path, pareto_path=None) -> None:
    header = ["p_bits", "weight_bits", "act_bits", "recon_error", "sparsity", "pass"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            writer.writerow(r.to_csv_row())
    if pareto_path is not None:
        with open(pareto_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for r in rows:
                if r.pareto:
                    writer.writerow(r.to_csv_row())
