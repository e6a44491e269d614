"""Request/response models for the HTTP service.

Wire field names match the JSON artifacts the CLI writes (certificates use
"pass", which needs an alias on the Python side). Matrices travel as nested
lists; jobs at this service's scale are single layers, so payload size is not
a concern.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class ConfigModel(BaseModel):
    weight_bits: int
    act_bits: int
    acc_bits: int | None = None
    tile: int | None = None
    algorithm: str = "gpfq"
    variant: str = "base"
    rounding: str = "nearest"
    soft_constraint: bool = True
    percentile: float = 99.0


class BudgetModel(BaseModel):
    p_bits: int
    act_bits: int
    act_signed: bool
    slack: float
    limit_neg: float
    limit_pos: float
    soft_budget: float
    tile: int | None = None
    twos_complement: bool = False


class UnitCheckModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    channel: int
    tile: int | None = None
    max_dot: int
    min_dot: int
    required_bits: int
    ok: bool = Field(alias="pass")


class CertificateModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    budget: BudgetModel
    perm: list[int] | None = None
    per_unit: list[UnitCheckModel]
    ok: bool = Field(alias="pass")


class ReportModel(BaseModel):
    recon_error: float
    sparsity: float
    certificate: CertificateModel | None = None
    config: ConfigModel


class QuantizeRequest(BaseModel):
    weights: list[list[float]]
    calib: list[list[float]]
    config: ConfigModel


class QuantizeResponse(BaseModel):
    codes: list[list[int]]
    report: ReportModel


class VerifyRequest(BaseModel):
    codes: list[list[int]]
    acc_bits: int
    act_bits: int
    signed_acts: bool = False
    tile: int | None = None
    perm: list[int] | None = None


class VerifyResponse(BaseModel):
    certificate: CertificateModel


class BoundsRequest(BaseModel):
    k: int
    m: int
    n: int
    signed_acts: bool = False
    tile: int | None = None


class BoundsResponse(BaseModel):
    min_accumulator_bits: int
    l1_budget: float
    limit_neg: float
    limit_pos: float
    inner_min_bits: int | None = None
    outer_bits: int | None = None


class SweepRequest(BaseModel):
    weights: list[list[float]]
    calib: list[list[float]]
    weight_bits: list[int]
    act_bits: list[int]
    acc_bits: list[int]
    config: ConfigModel | None = None


class SweepRowModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    p_bits: int
    weight_bits: int
    act_bits: int
    recon_error: float | None = None
    sparsity: float | None = None
    ok: bool = Field(alias="pass")
    pareto: bool = False
    error: str = ""


class SweepResponse(BaseModel):
    rows: list[SweepRowModel]
