"""FastAPI service wrapping the analysis pipeline.

Each endpoint takes a model configuration plus options and returns a
machine-readable report; the CLI is a thin client of these handlers
(in-process by default, over HTTP with --server).  Domain errors map to
structured JSON error bodies: model/configuration problems to 422,
solver failures to 409, bad requests to 400.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..dynamics import SimConfig, aeg_diagnostic, initial_bump, simulate
from ..errors import (CanndynError, CFLError, ConfigError, ConvergenceError,
                      GammaBoundError, LambdaDomainError, ModelAssumptionError,
                      NoEquilibriumError, PoleError, SelectorError,
                      SeparabilityError, SimulationError)
from ..grid import Grid, build_grid
from ..ingredients import ModelSpec, parse_model_config, validate_model
from ..linearization import (build_linearization, dissipativity_margin,
                             trivial_stability_check)
from ..spectral import build_spectral_report
from ..steady import (SteadyState, net_reproduction, solve_steady,
                      steady_from_arrays, trivial_steady)
from . import schemas as sc

_SOLVER_ERRORS = (NoEquilibriumError, ConvergenceError, GammaBoundError,
                  LambdaDomainError, PoleError, CFLError, SimulationError)
_MODEL_ERRORS = (ConfigError, SeparabilityError, ModelAssumptionError, SelectorError)

app = FastAPI(
    title="canndyn service",
    description="Equilibria, stability criteria, and simulation for a "
                "size-structured cannibalism model with environmental feedback.",
    version=__version__,
)


@app.exception_handler(CanndynError)
def _domain_error(request: Request, exc: CanndynError):
    if isinstance(exc, _MODEL_ERRORS):
        code, status = "model_invalid", 422
    elif isinstance(exc, _SOLVER_ERRORS):
        code, status = "solver_failed", 409
    else:
        code, status = "bad_request", 400
    body = {"error": {"code": code, "kind": type(exc).__name__, "message": str(exc)}}
    if isinstance(exc, ConfigError):
        body["error"]["path"] = exc.path
    return JSONResponse(status_code=status, content=body)


@app.exception_handler(ValueError)
def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={
        "error": {"code": "bad_request", "kind": "ValueError", "message": str(exc)}})


def _build_model(config: sc.ModelConfigModel, grid_opts: sc.GridOptions) -> ModelSpec:
    model = parse_model_config(config.model_dump())
    if grid_opts.s_max is not None:
        model = dataclasses.replace(model, s_max=grid_opts.s_max)
    return model


def _build_grid(model: ModelSpec, opts: sc.GridOptions) -> Grid:
    return build_grid(model.s_max, opts.n_cells, opts.spacing_mode, opts.ratio)


def _resolve_state(model: ModelSpec, grid: Grid, sel: sc.StateSelector) -> SteadyState:
    if sel.kind == "trivial":
        return trivial_steady(model, grid)
    if sel.kind == "solve":
        opts = sel.steady or sc.SteadyOptions()
        return solve_steady(model, grid, opts.n0_bracket, opts.fp_tol,
                            opts.damping, opts.max_iter)
    if sel.n is None or sel.E is None or sel.M is None or sel.n0 is None:
        raise ValueError("state kind 'values' needs n0, n, E, and M")
    if not (len(sel.n) == len(sel.E) == len(sel.M) == grid.n_nodes):
        raise ValueError("state arrays must match the grid node count")
    return steady_from_arrays(grid, sel.n0, sel.n, sel.E, sel.M)


def _state_summary(kind: str, state: SteadyState) -> sc.StateSummary:
    return sc.StateSummary(kind=kind, n0=state.n0, residual_fp=state.residual_fp,
                           residual_R=state.residual_R)


@app.get("/health", response_model=sc.HealthResponse)
def health() -> sc.HealthResponse:
    return sc.HealthResponse(status="ok", version=__version__)


@app.post("/validate", response_model=sc.ValidateResponse)
def validate(req: sc.ValidateRequest) -> sc.ValidateResponse:
    model = parse_model_config(req.model.model_dump())
    report = validate_model(model, req.e_range, req.n_samples, req.tail_tol)
    return sc.ValidateResponse(**report.to_dict())


@app.post("/steady", response_model=sc.SteadyResponse)
def steady(req: sc.SteadyRequest) -> sc.SteadyResponse:
    model = _build_model(req.model, req.grid)
    grid = _build_grid(model, req.grid)
    state = solve_steady(model, grid, req.steady.n0_bracket, req.steady.fp_tol,
                         req.steady.damping, req.steady.max_iter)
    return sc.SteadyResponse(**state.to_dict())


@app.post("/stability", response_model=sc.StabilityResponse)
def stability(req: sc.StabilityRequest) -> sc.StabilityResponse:
    model = _build_model(req.model, req.grid)
    grid = _build_grid(model, req.grid)
    state = _resolve_state(model, grid, req.state)
    lin = build_linearization(model, state)
    verdict = dissipativity_margin(lin)
    trivial_check = None
    if req.state.kind == "trivial":
        tc = trivial_stability_check(model, grid)
        trivial_check = sc.TrivialCheckModel(stable=tc.stable, R0=tc.R0)
    return sc.StabilityResponse(
        margin=verdict.margin,
        stable_by_dissipativity=verdict.stable_by_dissipativity,
        positivity_pos1=verdict.positivity_pos1,
        positivity_pos2=verdict.positivity_pos2,
        aeg_hypotheses_met=verdict.aeg_hypotheses_met,
        mu0=lin.mu0,
        s=grid.nodes.tolist(),
        margin_profile=verdict.margin_profile.values.tolist(),
        state=_state_summary(req.state.kind, state),
        trivial_check=trivial_check,
    )


@app.post("/spectrum", response_model=sc.SpectrumResponse)
def spectrum(req: sc.SpectrumRequest) -> sc.SpectrumResponse:
    model = _build_model(req.model, req.grid)
    grid = _build_grid(model, req.grid)
    state = _resolve_state(model, grid, req.state)
    lin = build_linearization(model, state)
    report = build_spectral_report(lin, req.lambda_range, req.n_scan, req.root_tol)
    return sc.SpectrumResponse(
        K0=report.K0,
        unstable_by_K0=report.unstable_by_K0,
        Lprime0=report.Lprime0,
        real_roots_K=[sc.RootModel(**r.to_dict()) for r in report.real_roots_K],
        L_roots=[sc.RootModel(**r.to_dict()) for r in report.L_roots],
        samples=[sc.SampleModel(**s.to_dict()) for s in report.samples],
        note=report.note,
        state=_state_summary(req.state.kind, state),
    )


def _resolve_initial(grid: Grid, state: SteadyState, sel: sc.InitialSelector):
    if sel.kind == "steady":
        return state.n
    if sel.kind == "bump":
        return initial_bump(grid, sel.center, sel.width, sel.amplitude)
    if sel.values is None or len(sel.values) != grid.n_nodes:
        raise ValueError("initial kind 'values' needs one value per grid node")
    return grid.function(np.asarray(sel.values, dtype=float))


@app.post("/simulate", response_model=sc.SimulateResponse)
def run_simulation(req: sc.SimulateRequest) -> sc.SimulateResponse:
    model = _build_model(req.model, req.grid)
    grid = _build_grid(model, req.grid)
    needs_state = req.mode == "linearized" or req.initial.kind == "steady"
    state = _resolve_state(model, grid, req.state) if needs_state else trivial_steady(model, grid)
    lin = build_linearization(model, state) if req.mode == "linearized" else None
    cfg = SimConfig(t_end=req.t_end, mode=req.mode, dt=req.dt, cfl=req.cfl,
                    record_every=req.record_every)
    initial = _resolve_initial(grid, state, req.initial)
    report = simulate(model, initial, cfg, lin=lin, snapshot_times=req.snapshot_times)
    aeg = None
    if req.aeg_tol is not None and req.mode == "linearized":
        verdict = aeg_diagnostic(report, req.aeg_tol)
        aeg = sc.AegModel(**verdict.to_dict())
    payload = report.to_dict()
    payload["snapshots"] = [sc.SnapshotModel(**s) for s in payload["snapshots"]]
    return sc.SimulateResponse(**payload, aeg=aeg)


def set_config_path(config: dict, path: str, value: float) -> None:
    """Assign a scalar at a dotted path like mu.base.params.0 in place."""
    parts = path.split(".")
    node = config
    try:
        for key in parts[:-1]:
            node = node[int(key)] if isinstance(node, list) else node[key]
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            if last not in node:
                raise KeyError(last)
            node[last] = value
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"invalid vary path {path!r}: {exc}") from exc


def _sweep_point(base_config: dict, assignments: list, req: sc.SweepRequest) -> sc.SweepRowModel:
    import copy

    params = {path: value for path, value in assignments}
    index = -1  # filled by the caller
    try:
        config = copy.deepcopy(base_config)
        for path, value in assignments:
            set_config_path(config, path, value)
        model = parse_model_config(config)
        if req.grid.s_max is not None:
            model = dataclasses.replace(model, s_max=req.grid.s_max)
        grid = _build_grid(model, req.grid)
        r0 = net_reproduction(model, grid.zeros(), grid.zeros())
        state = _resolve_state(model, grid, req.state)
        lin = build_linearization(model, state)
        verdict = dissipativity_margin(lin)
        report = build_spectral_report(lin, req.lambda_range, req.n_scan, req.root_tol)
        roots = [r.root for r in report.real_roots_K]
        bump = initial_bump(grid, model.s_max / 5.0, model.s_max / 12.0, 1.0)
        sim = simulate(model, bump,
                       SimConfig(t_end=req.sim_t_end, mode="linearized",
                                 record_every=req.sim_record_every), lin=lin)
        return sc.SweepRowModel(
            index=index, params=params, R0=r0, margin=verdict.margin,
            K0=report.K0, rightmost_root=max(roots) if roots else None,
            sim_growth_rate=sim.growth_rate)
    except (CanndynError, ValueError) as exc:
        return sc.SweepRowModel(index=index, params=params, error=str(exc))


@app.post("/sweep", response_model=sc.SweepResponse)
def sweep(req: sc.SweepRequest) -> sc.SweepResponse:
    import copy

    base_config = req.model.model_dump()
    specs = [req.vary] + ([req.vary2] if req.vary2 is not None else [])
    for spec in specs:  # a bad path is a usage error, not a per-point failure
        set_config_path(copy.deepcopy(base_config), spec.path, spec.lo)
    grids = [np.linspace(v.lo, v.hi, v.n) for v in specs]
    points = []
    if len(grids) == 1:
        points = [[(specs[0].path, float(x))] for x in grids[0]]
    else:
        for x in grids[0]:
            for y in grids[1]:
                points.append([(specs[0].path, float(x)), (specs[1].path, float(y))])

    threads = req.threads or int(os.environ.get("CANNDYN_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda a: _sweep_point(base_config, a, req), points))
    else:
        rows = [_sweep_point(base_config, a, req) for a in points]
    rows = [row.model_copy(update={"index": i}) for i, row in enumerate(rows)]
    return sc.SweepResponse(
        param_paths=[v.path for v in specs],
        rows=rows,
        n_failures=sum(1 for r in rows if r.error is not None),
    )
