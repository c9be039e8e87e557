"""Request and response schemas of the discovery-bounds service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Q1Mode = Literal["jensen_lb", "exact"]
SweepVariable = Literal["users", "snr"]


class CapacityCurveRequest(BaseModel):
    ells: list[int] = Field(default=[10**4, 10**5, 10**6], min_length=1)
    snr: float = 1e-4
    gamma: float | None = 0.5
    alpha: float | None = None
    n_start: float = 2000.0
    n_stop: float = 20000.0
    n_points: int = Field(default=19, ge=1)
    allow_snr_out_of_range: bool = False


class IdCostRequest(BaseModel):
    variable: SweepVariable = "users"
    start: float
    stop: float
    points: int = Field(default=10, ge=1)
    snr: float | None = None
    ell: int | None = None
    gamma: float | None = 0.5
    alpha: float | None = None
    allow_snr_out_of_range: bool = False


class BoundsRequest(BaseModel):
    ell: int = Field(ge=1)
    alpha: float | None = None
    gamma: float | None = None
    snr: float = 1e-4
    sigma2_w: float = 1.0
    n: int | None = Field(default=None, ge=1)
    p: float | None = Field(default=None, ge=0.0, le=1.0)
    delta: float = Field(default=0.05, ge=0.0)
    tau2: float | None = Field(default=None, ge=0.0)
    q1_mode: Q1Mode = "jensen_lb"
    delta_exp: float = Field(default=1.0, gt=0.0)
    optimize_tau: bool = False
    grid_points: int = Field(default=200, ge=2)
    allow_snr_out_of_range: bool = False


class GapSweepRequest(BaseModel):
    variable: SweepVariable = "users"
    start: float
    stop: float
    points: int = Field(default=10, ge=1)
    snr: float | None = None
    ell: int | None = None
    gamma: float | None = 0.5
    alpha: float | None = None
    delta: float = Field(default=0.05, ge=0.0)
    delta_exp: float = Field(default=1.0, gt=0.0)
    q1_mode: Q1Mode = "jensen_lb"
    grid_points: int = Field(default=200, ge=2)
    trials: int = Field(default=0, ge=0)
    seed: int = 0
    n: int | None = Field(default=None, ge=1)
    allow_snr_out_of_range: bool = False


class SimulateRequest(BoundsRequest):
    trials: int = Field(default=1000, ge=1)
    seed: int = 0
    fixed_matrix: bool = False
    iid_fading: bool = False
    q1_override: float | None = Field(default=None, ge=0.0, le=1.0)
    dump_round: bool = False


class ValidateRequest(BaseModel):
    draws: int = Field(default=200_000, ge=1)
    seed: int = 2024


class HealthResponse(BaseModel):
    status: str
    version: str


class CsvResponse(BaseModel):
    columns: list[str]
    row_count: int
    csv: str


class BoundsResponse(BaseModel):
    report: dict
    csv: str


class OptimizeResponse(BaseModel):
    tau2: float
    report: dict
    csv: str


class SimulateResponse(BaseModel):
    report: dict
    stats: dict
    csv: str
    round_csv: str | None = None


class CheckOut(BaseModel):
    name: str
    passed: bool
    detail: str


class ValidateResponse(BaseModel):
    passed: bool
    checks: list[CheckOut]
