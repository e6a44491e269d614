"""FastAPI service wrapping the quantization engine.

Each endpoint is a thin adapter: validate the request model, hand numpy
arrays to the core package, and translate results (and domain errors) back to
wire models. State-free, so one instance serves concurrent per-layer jobs.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException

from ..bounds import (
    AccumulatorBudget,
    InfeasibleBudgetError,
    l1_budget,
    min_accumulator_bits,
    outer_accumulator_bits,
    strict_limits,
)
from ..numeric import Alphabet
from ..optq import FactorizationError
from ..oracle import verify
from ..pipeline import LayerJob, QuantConfig, SweepRow, quantize_layer, sweep
from .schemas import (
    BoundsRequest,
    BoundsResponse,
    CertificateModel,
    QuantizeRequest,
    QuantizeResponse,
    ReportModel,
    SweepRequest,
    SweepResponse,
    SweepRowModel,
    VerifyRequest,
    VerifyResponse,
)

_DOMAIN_ERRORS = (ValueError, InfeasibleBudgetError, FactorizationError)


def _row_model(row: SweepRow) -> SweepRowModel:
    return SweepRowModel(
        p_bits=row.p_bits,
        weight_bits=row.weight_bits,
        act_bits=row.act_bits,
        recon_error=None if math.isnan(row.recon_error) else row.recon_error,
        sparsity=None if math.isnan(row.sparsity) else row.sparsity,
        ok=row.ok,
        pareto=row.pareto,
        error=row.error,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="axq", description="accumulator-aware quantization service")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/bounds", response_model=BoundsResponse)
    def bounds(req: BoundsRequest) -> BoundsResponse:
        try:
            p_star = min_accumulator_bits(req.k, req.m, req.n, req.signed_acts)
            a, b = strict_limits(p_star, req.n, 0.5)
            inner = outer = None
            if req.tile is not None:
                inner = min_accumulator_bits(req.tile, req.m, req.n, req.signed_acts)
                outer = outer_accumulator_bits(inner, req.k, req.tile)
            return BoundsResponse(
                min_accumulator_bits=p_star,
                l1_budget=l1_budget(p_star, req.n),
                limit_neg=a,
                limit_pos=b,
                inner_min_bits=inner,
                outer_bits=outer,
            )
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/verify", response_model=VerifyResponse)
    def verify_codes(req: VerifyRequest) -> VerifyResponse:
        try:
            # slack only affects greedy limits, not the register-range check,
            # and slack 0 keeps any P >= 2 verifiable
            budget = AccumulatorBudget.make(
                req.acc_bits,
                Alphabet(bits=req.act_bits, signed=req.signed_acts),
                slack=0.0,
                tile=req.tile,
            )
            cert = verify(np.asarray(req.codes, dtype=np.int64), budget, perm=req.perm)
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return VerifyResponse(certificate=CertificateModel.model_validate(cert.to_dict()))

    @app.post("/quantize", response_model=QuantizeResponse)
    def quantize(req: QuantizeRequest) -> QuantizeResponse:
        try:
            config = QuantConfig.from_dict(req.config.model_dump())
            job = LayerJob(
                weights=np.asarray(req.weights, dtype=np.float64),
                calib=np.asarray(req.calib, dtype=np.float64),
                config=config,
            )
            codes, report = quantize_layer(job)
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return QuantizeResponse(
            codes=codes.tolist(),
            report=ReportModel.model_validate(report.to_dict()),
        )

    @app.post("/sweep", response_model=SweepResponse)
    def run_sweep(req: SweepRequest) -> SweepResponse:
        base = QuantConfig.from_dict(
            req.config.model_dump()
            if req.config is not None
            else {"weight_bits": 4, "act_bits": 8, "variant": "axe"}
        )
        try:
            rows = sweep(
                np.asarray(req.weights, dtype=np.float64),
                np.asarray(req.calib, dtype=np.float64),
                req.weight_bits,
                req.act_bits,
                req.acc_bits,
                base,
            )
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SweepResponse(rows=[_row_model(r) for r in rows])

    return app


app = create_app()
