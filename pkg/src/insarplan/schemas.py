"""Request and response models for the HTTP service."""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, Field, field_validator

from .cli_experiments import FIGURES

Figure = Literal["convergence", "step_size", "baseline_vs_pcom", "coverage_vs_snr_min", "velocity_vs_pcom"]
assert set(Figure.__args__) == set(FIGURES)


class Position(BaseModel):
    x: float
    z: float


class ScenarioPatch(BaseModel):
    """Scenario values in canonical SI units, keyed by scenario key."""

    overrides: dict[str, float] = Field(default_factory=dict)
    paper_scale: bool = False


class ScenarioOut(BaseModel):
    values: dict[str, float]
    kinds: dict[str, str]
    text: str


class MetricsRequest(ScenarioPatch):
    q1: Position
    q2: Position
    v: list[float] | float = 4.0
    p_com_1: list[float] | float = 6.0
    p_com_2: list[float] | float = 6.0


class ConstraintOut(BaseModel):
    margin: float | None
    satisfied: bool


class MetricsOut(BaseModel):
    coverage: float
    metrics: dict[str, float | list[float] | None]
    constraints: dict[str, ConstraintOut]
    feasible: bool


class SolveRequest(ScenarioPatch):
    psi: float | None = Field(default=None, ge=0.0, le=1.0)
    scheme: str = "proposed"
    init: Literal["F1", "F2"] = "F1"
    seed: int = Field(default=0, ge=0)


class SolutionOut(BaseModel):
    q1: Position
    q2: Position
    v: list[float]
    p_com_1: list[float]
    p_com_2: list[float]
    coverage: float
    feasible: bool
    status: str
    iterations: int
    psi: float
    scheme: str
    coverage_history: list[float]
    metrics: dict[str, float | list[float] | None] | None
    constraints: dict[str, ConstraintOut]


class ExperimentRequest(ScenarioPatch):
    figure: Figure
    realizations: int | None = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    psi: float | Literal["auto"] | None = None
    benchmark: str = "none"
    init: Literal["F1", "F2"] = "F1"
    psi_step: float | None = Field(default=None, gt=0.0, le=1.0)
    scenario_text: str | None = None

    @field_validator("benchmark")
    @classmethod
    def _benchmark(cls, v: str) -> str:
        if v.lower() not in {"1", "2", "3", "none", "all"}:
            raise ValueError("benchmark must be one of 1, 2, 3, none, all")
        return v.lower()


class ExperimentOut(BaseModel):
    figure: str
    runs: list[dict[str, float | int | str | None]]
    aggregate: list[dict[str, float | int | str | None]]
    error: str | None = None


def nan_to_none(row: dict) -> dict:
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}


def none_to_nan(row: dict) -> dict:
    return {k: (math.nan if v is None else v) for k, v in row.items()}
