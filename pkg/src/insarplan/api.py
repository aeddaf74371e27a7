"""HTTP service around the planner."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__
from .ao_driver import AoSettings, Scheme, audit, initial_state, run_ao
from .constraints import DecisionState, evaluate_constraints, state_coverage
from .cli_experiments import DESK_PSI_STEP, ExperimentError, ExperimentSpec, check_feasible, collect, desk_config
from .geometry_coverage import AcrossTrackPosition, FormationState
from .scenario import ScenarioConfig, ScenarioError, derive_constants, dump_scenario, parse_scenario, scenario_keys
from .schemas import (
    ConstraintOut,
    ExperimentOut,
    ExperimentRequest,
    MetricsOut,
    MetricsRequest,
    Position,
    ScenarioOut,
    ScenarioPatch,
    SolutionOut,
    SolveRequest,
    nan_to_none,
)


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def build_config(req: ScenarioPatch, base: ScenarioConfig | None = None) -> ScenarioConfig:
    cfg = base or ScenarioConfig()
    try:
        if req.overrides:
            unknown = set(req.overrides) - set(scenario_keys())
            if unknown:
                raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
            kinds = scenario_keys()
            vals = {k: int(v) if kinds[k] == "count" else v for k, v in req.overrides.items()}
            cfg = cfg.replace(**vals)
        cfg = cfg.validate()
    except ScenarioError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return cfg if req.paper_scale else desk_config(cfg)


def _constraints(report) -> dict[str, ConstraintOut]:
    return {k: ConstraintOut(margin=_finite(r.margin), satisfied=r.satisfied) for k, r in report.results.items()}


def _metrics(a) -> dict:
    return {k: (v if isinstance(v, list) else _finite(v)) for k, v in a.as_dict().items()}


def _vector(x, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()


def solution_out(sol) -> SolutionOut:
    st = sol.state
    return SolutionOut(
        q1=Position(x=st.q1.x, z=st.q1.z), q2=Position(x=st.q2.x, z=st.q2.z),
        v=st.v.tolist(), p_com_1=st.p_com_1.tolist(), p_com_2=st.p_com_2.tolist(),
        coverage=sol.score, feasible=sol.feasible, status=sol.status, iterations=sol.iterations,
        psi=sol.psi, scheme=sol.scheme.value, coverage_history=sol.coverage_history,
        metrics=_metrics(sol.metrics) if sol.metrics else None, constraints=_constraints(sol.report),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="insarplan", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/scenario/default", response_model=ScenarioOut)
    def default_scenario():
        cfg = ScenarioConfig()
        return ScenarioOut(values={k: float(v) for k, v in dataclasses.asdict(cfg).items()},
                           kinds=scenario_keys(), text=dump_scenario(cfg))

    @app.post("/metrics", response_model=MetricsOut)
    def metrics(req: MetricsRequest):
        cfg = build_config(req)
        consts = derive_constants(cfg)
        n = cfg.n_slots
        try:
            state = DecisionState(
                FormationState(AcrossTrackPosition(req.q1.x, req.q1.z), AcrossTrackPosition(req.q2.x, req.q2.z)),
                _vector(req.v, n), _vector(req.p_com_1, n), _vector(req.p_com_2, n))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        report = evaluate_constraints(state, cfg, consts)
        try:
            m = _metrics(audit(state, cfg, consts))
        except (ValueError, ArithmeticError):
            m = {}
        return MetricsOut(coverage=state_coverage(state, cfg), metrics=m,
                          constraints=_constraints(report), feasible=report.all_satisfied)

    @app.post("/solve", response_model=SolutionOut)
    def solve(req: SolveRequest):
        cfg = build_config(req)
        try:
            scheme = Scheme.from_benchmark(req.scheme)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        sol = run_ao(cfg, req.psi, initial_state(cfg, req.init), req.seed, scheme,
                     AoSettings(n_particles=cfg.pso_particles, pso_iters=cfg.pso_iters))
        return solution_out(sol)

    @app.post("/experiments", response_model=ExperimentOut)
    def experiments(req: ExperimentRequest):
        base = None
        if req.scenario_text is not None:
            try:
                base = parse_scenario(req.scenario_text, source="<request>")
            except ScenarioError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        cfg = build_config(req, base)
        spec = ExperimentSpec(
            figure=req.figure, cfg=cfg, realizations=req.realizations or cfg.realizations, seed=req.seed,
            psi=req.psi, benchmark=req.benchmark, init=req.init,
            psi_step=req.psi_step or (cfg.eps_5 if req.paper_scale else DESK_PSI_STEP),
        )
        rows, agg = collect(spec)
        error = None
        try:
            check_feasible(rows)
        except ExperimentError as exc:
            error = exc.cause
        return ExperimentOut(figure=req.figure, runs=[nan_to_none(r) for r in rows],
                             aggregate=[nan_to_none(r) for r in agg], error=error)

    return app


app = create_app()
