"""FastAPI service wrapping the bounds/simulation library.

The service is stateless: every endpoint maps one request onto pure
library calls and returns the CSV artifact (with its JSON configuration
header) plus structured values. Configuration errors come back as 400
with kind "config", numerical failures with kind "numerical"; the CLI
maps those onto exit codes 1 and 2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import replace

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bounds import bound_report, optimize_threshold
from ..capacity import DEFAULT_CAPACITY
from ..errors import ConfigError, NumericalFailure
from ..montecarlo import TrialStats
from ..params import DiscoveryConfig, ErrorTarget, params_for_snr
from ..sweeps import (
    alpha_for,
    capacity_curve,
    gap_sweep,
    id_cost_sweep,
    render_csv,
    simulate_run,
    validate_checks,
)
from .models import (
    BoundsRequest,
    BoundsResponse,
    CapacityCurveRequest,
    CheckOut,
    CsvResponse,
    GapSweepRequest,
    HealthResponse,
    IdCostRequest,
    OptimizeResponse,
    SimulateRequest,
    SimulateResponse,
    ValidateRequest,
    ValidateResponse,
)

app = FastAPI(
    title="mnac-gt",
    description="Closed-form bounds and Monte Carlo simulation for "
    "group-testing device discovery over Rayleigh-fading many-access channels.",
    version=__version__,
)


@app.exception_handler(ConfigError)
async def _config_error(_: Request, exc: ConfigError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"kind": "config", "message": str(exc)})


@app.exception_handler(NumericalFailure)
async def _numerical_error(_: Request, exc: NumericalFailure) -> JSONResponse:
    return JSONResponse(status_code=400, content={"kind": "numerical", "message": str(exc)})


def _cap(allow: bool):
    return replace(DEFAULT_CAPACITY, allow_out_of_range=True) if allow else DEFAULT_CAPACITY


def _meta(command: str, req) -> dict:
    return {"command": command, **req.model_dump()}


def _system(req: BoundsRequest):
    return params_for_snr(
        req.ell, alpha_for(req.ell, req.alpha, req.gamma), req.snr, req.sigma2_w
    )


def _discovery(req: BoundsRequest) -> DiscoveryConfig:
    return DiscoveryConfig(
        n=req.n, p=req.p, delta_margin=req.delta, tau2=req.tau2, q1_mode=req.q1_mode
    )


def _report_dict(report) -> dict:
    return dataclasses.asdict(report)


def _stats_dict(stats: TrialStats) -> dict:
    return dict(zip(("trials", "md_union_count", "fp_union_count", "md_user_total",
                     "fp_user_total", "p_md", "p_md_lo", "p_md_hi", "p_fp", "p_fp_lo",
                     "p_fp_hi", "q1_draws", "q1_est", "q1_lo", "q1_hi",
                     "q2_draws", "q2_est", "q2_lo", "q2_hi"), stats.to_row()))


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/capacity/curve", response_model=CsvResponse)
def capacity_curve_endpoint(req: CapacityCurveRequest) -> CsvResponse:
    columns, rows = capacity_curve(
        ells=req.ells, snr=req.snr, gamma=req.gamma, alpha=req.alpha,
        n_start=req.n_start, n_stop=req.n_stop, n_points=req.n_points,
        cap=_cap(req.allow_snr_out_of_range),
    )
    return CsvResponse(
        columns=columns, row_count=len(rows),
        csv=render_csv(_meta("capacity-curve", req), columns, rows),
    )


@app.post("/id-cost", response_model=CsvResponse)
def id_cost_endpoint(req: IdCostRequest) -> CsvResponse:
    columns, rows = id_cost_sweep(
        variable=req.variable, start=req.start, stop=req.stop, points=req.points,
        snr=req.snr, ell=req.ell, gamma=req.gamma, alpha=req.alpha,
        cap=_cap(req.allow_snr_out_of_range),
    )
    return CsvResponse(
        columns=columns, row_count=len(rows),
        csv=render_csv(_meta("id-cost", req), columns, rows),
    )


@app.post("/bounds", response_model=BoundsResponse)
def bounds_endpoint(req: BoundsRequest) -> BoundsResponse:
    params = _system(req)
    cfg = _discovery(req)
    target = ErrorTarget(delta_exp=req.delta_exp)
    cap = _cap(req.allow_snr_out_of_range)
    if req.optimize_tau or cfg.tau2 is None:
        _, report = optimize_threshold(params, cfg, target, req.grid_points, cap)
    else:
        report = bound_report(params, cfg, target, cap)
    from ..bounds import BOUND_REPORT_COLUMNS

    csv = render_csv(_meta("bounds", req), BOUND_REPORT_COLUMNS, [report.to_row()])
    return BoundsResponse(report=_report_dict(report), csv=csv)


@app.post("/optimize-tau", response_model=OptimizeResponse)
def optimize_tau_endpoint(req: BoundsRequest) -> OptimizeResponse:
    params = _system(req)
    cfg = _discovery(req)
    target = ErrorTarget(delta_exp=req.delta_exp)
    cap = _cap(req.allow_snr_out_of_range)
    tau2, report = optimize_threshold(params, cfg, target, req.grid_points, cap)
    from ..bounds import BOUND_REPORT_COLUMNS

    csv = render_csv(_meta("optimize-tau", req), BOUND_REPORT_COLUMNS, [report.to_row()])
    return OptimizeResponse(tau2=tau2, report=_report_dict(report), csv=csv)


@app.post("/gap-sweep", response_model=CsvResponse)
def gap_sweep_endpoint(req: GapSweepRequest) -> CsvResponse:
    columns, rows = gap_sweep(
        variable=req.variable, start=req.start, stop=req.stop, points=req.points,
        snr=req.snr, ell=req.ell, gamma=req.gamma, alpha=req.alpha,
        delta_margin=req.delta, delta_exp=req.delta_exp, q1_mode=req.q1_mode,
        grid_points=req.grid_points, trials=req.trials, seed=req.seed, n=req.n,
        cap=_cap(req.allow_snr_out_of_range),
    )
    return CsvResponse(
        columns=columns, row_count=len(rows),
        csv=render_csv(_meta("gap-sweep", req), columns, rows),
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
    params = _system(req)
    cfg = _discovery(req)
    target = ErrorTarget(delta_exp=req.delta_exp)
    columns, rows, report, stats, round_csv = simulate_run(
        params, cfg, target, trials=req.trials, seed=req.seed,
        grid_points=req.grid_points, optimize_tau=req.optimize_tau,
        redraw_matrix=not req.fixed_matrix, iid_fading=req.iid_fading,
        q1_override=req.q1_override, dump_round=req.dump_round,
        cap=_cap(req.allow_snr_out_of_range),
    )
    csv = render_csv(_meta("simulate", req), columns, rows)
    return SimulateResponse(
        report=_report_dict(report), stats=_stats_dict(stats), csv=csv, round_csv=round_csv
    )


@app.post("/validate", response_model=ValidateResponse)
def validate_endpoint(req: ValidateRequest) -> ValidateResponse:
    checks = validate_checks(draws=req.draws, seed=req.seed)
    return ValidateResponse(
        passed=all(c.passed for c in checks),
        checks=[CheckOut(name=c.name, passed=c.passed, detail=c.detail) for c in checks],
    )
