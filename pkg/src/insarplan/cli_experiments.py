"""Monte-Carlo campaigns behind the convergence, step-size and sweep figures.

Every figure writes two files into the output directory:

``<figure>_runs.csv``
    one row per (scheme, group, x, realization[, iteration])
``<figure>_aggregate.csv``
    mean and population standard deviation per (scheme, group, x)
"""

from __future__ import annotations

import csv
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ao_driver import AoSettings, Scheme, audit, initial_state, run_ao, search_psi
from .scenario import ScenarioConfig, db_to_linear, derive_constants

log = logging.getLogger(__name__)

FIGURES = ("convergence", "step_size", "baseline_vs_pcom", "coverage_vs_snr_min", "velocity_vs_pcom")

RUN_COLUMNS = (
    "figure", "scheme", "group", "x", "realization", "seed", "iteration", "feasible", "coverage",
    "baseline", "b_perp", "h_amb", "delta_h_90", "mean_velocity", "energy_1", "energy_2", "psi", "status",
)
METRICS = ("coverage", "baseline", "b_perp", "h_amb", "delta_h_90", "mean_velocity", "energy_1", "energy_2")
AGGREGATE_COLUMNS = ("figure", "scheme", "group", "x", "n", "feasible_rate") + tuple(
    f"{m}_{s}" for m in METRICS for s in ("mean", "std"))

DESK_SCALE = {"pso_particles": 200, "pso_iters": 50, "realizations": 20}
DESK_PSI_STEP = 0.05
PSI_SEARCH_SEEDS = 5

# sweep grids (dBW for powers)
PCOM_BASELINE_GRID_DB = (6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0)
PCOM_VELOCITY_GRID_DB = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
SNR_MIN_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)
SNR_PCOM_LEVELS_DB = (5.0, 10.0)
VELOCITY_SNR_LEVELS = (0.6, 0.7, 0.8)
BETA_BASELINE_DB = 19.3
BETA_VELOCITY_DB = 20.91


class ExperimentError(RuntimeError):
    """Raised with a machine-readable ``cause`` when a campaign cannot produce results."""

    def __init__(self, cause: str, message: str):
        super().__init__(message)
        self.cause = cause


class SchemaError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    figure: str
    cfg: ScenarioConfig
    realizations: int
    seed: int = 0
    psi: float | str | None = None  # None: search for the convergence figure, scenario value elsewhere
    benchmark: str = "none"
    out: Path = Path("results")
    init: str = "F1"
    psi_step: float = DESK_PSI_STEP
    workers: int = 1
    grid: tuple = field(default=())

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure {self.figure!r}; choose from {', '.join(FIGURES)}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.grid and list(self.grid) != sorted(self.grid):
            raise ValueError("sweep grid must be sorted")
        self.out = Path(self.out)


def desk_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Downscale the swarm and realization count; values the user changed are kept."""
    table = ScenarioConfig()
    return cfg.replace(**{k: v for k, v in DESK_SCALE.items() if getattr(cfg, k) == getattr(table, k)})


def realization_seeds(base_seed: int, k: int) -> list[int]:
    """Independent per-realization seeds; realization i gets the same seed at every grid point."""
    children = np.random.SeedSequence(base_seed).spawn(k)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _settings(cfg: ScenarioConfig) -> AoSettings:
    return AoSettings(n_particles=cfg.pso_particles, pso_iters=cfg.pso_iters)


# ----------------------------------------------------------------------------
# a single job and its CSV rows


@dataclass(frozen=True)
class Job:
    figure: str
    scheme: str
    group: str
    x: float
    realization: int
    seed: int
    cfg: ScenarioConfig
    psi: float
    init: str
    per_iteration: bool


def _metric_row(state, feasible, cfg, consts) -> dict:
    if not feasible:
        return {m: math.nan for m in METRICS} | {"coverage": 0.0}
    a = audit(state, cfg, consts)
    return {
        "coverage": a.coverage, "baseline": a.baseline, "b_perp": a.b_perp, "h_amb": a.h_amb,
        "delta_h_90": a.delta_h_90, "mean_velocity": a.mean_velocity,
        "energy_1": a.energy[0], "energy_2": a.energy[1],
    }


def run_job(job: Job) -> list[dict]:
    cfg = job.cfg
    consts = derive_constants(cfg)
    sol = run_ao(cfg, job.psi, initial_state(cfg, job.init), job.seed, job.scheme, _settings(cfg), consts)
    base = {"figure": job.figure, "scheme": job.scheme, "group": job.group, "x": job.x,
            "realization": job.realization, "seed": job.seed, "psi": sol.psi, "status": sol.status}
    if not job.per_iteration:
        return [base | {"iteration": sol.iterations, "feasible": int(sol.feasible)}
                | _metric_row(sol.state, sol.feasible, cfg, consts)]
    rows = []
    for rec in sol.history:
        rows.append(base | {"x": rec.iteration, "iteration": rec.iteration, "feasible": int(rec.feasible)}
                    | _metric_row(rec.state, rec.feasible, cfg, consts))
    return rows


def _pad_iterations(rows: list[dict]) -> list[dict]:
    """Carry each run's last row forward so every run in a scheme has the same iteration count."""
    by_run = defaultdict(list)
    for r in rows:
        by_run[(r["scheme"], r["group"], r["realization"])].append(r)
    longest = defaultdict(int)
    for (scheme, group, _), rs in by_run.items():
        longest[(scheme, group)] = max(longest[(scheme, group)], len(rs))
    out = []
    for key, rs in by_run.items():
        last = rs[-1]
        extra = [last | {"x": last["iteration"] + i + 1, "iteration": last["iteration"] + i + 1}
                 for i in range(longest[key[:2]] - len(rs))]
        out.extend(rs + extra)
    return out


def _execute(jobs: list[Job], workers: int) -> list[dict]:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_job, jobs))
    else:
        chunks = [run_job(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


# ----------------------------------------------------------------------------
# figure designs


def _schemes(spec: ExperimentSpec, default: tuple[str, ...]) -> tuple[str, ...]:
    b = str(spec.benchmark).lower()
    if b == "all":
        return tuple(s.value for s in Scheme)
    if b == "none":
        return default
    return (Scheme.from_benchmark(b).value,)


def _resolve_psi(spec: ExperimentSpec, cfg: ScenarioConfig, scheme: str, seeds: list[int]) -> float:
    if scheme == Scheme.CLASSICAL_AO.value:
        return 1.0
    psi = spec.psi
    if psi is None:
        psi = "auto" if spec.figure == "convergence" else cfg.psi
    if str(psi).lower() != "auto":
        return float(psi)
    if scheme == Scheme.FIXED_STEADY_SPEED.value:
        return cfg.psi  # velocity is frozen; psi never acts
    res = search_psi(cfg, initial_state(cfg, spec.init), spec.psi_step, seeds[:PSI_SEARCH_SEEDS],
                     scheme, _settings(cfg))
    log.info("psi search (%s): psi* = %.2f, mean coverage %.1f", scheme, res.psi, res.mean_coverage)
    return res.psi


def build_jobs(spec: ExperimentSpec) -> list[Job]:
    cfg = spec.cfg
    seeds = realization_seeds(spec.seed, spec.realizations)
    jobs: list[Job] = []

    def add(scheme, group, x, c, psi, per_iteration=False, init=spec.init):
        for i, s in enumerate(seeds):
            jobs.append(Job(spec.figure, scheme, group, float(x), i, s, c, psi, init, per_iteration))

    if spec.figure == "convergence":
        default = tuple(s.value for s in Scheme)
        for scheme in _schemes(spec, default):
            add(scheme, spec.init, 0, cfg, _resolve_psi(spec, cfg, scheme, seeds), per_iteration=True)
    elif spec.figure == "step_size":
        grid = spec.grid or tuple(np.round(np.arange(0, 1 + 1e-9, spec.psi_step), 10))
        for init in ("F1", "F2"):
            for psi in grid:
                add(Scheme.PROPOSED.value, init, psi, cfg, float(psi), init=init)
    else:
        (scheme,) = _schemes(spec, (Scheme.PROPOSED.value,))[:1]
        if spec.figure == "baseline_vs_pcom":
            c0 = cfg.replace(beta_c_1=db_to_linear(BETA_BASELINE_DB), beta_c_2=db_to_linear(BETA_BASELINE_DB))
            for p_db in spec.grid or PCOM_BASELINE_GRID_DB:
                c = c0.replace(p_com_max=db_to_linear(p_db))
                add(scheme, "all", p_db, c, _resolve_psi(spec, c, scheme, seeds))
        elif spec.figure == "coverage_vs_snr_min":
            for p_db in SNR_PCOM_LEVELS_DB:
                for g in spec.grid or SNR_MIN_GRID:
                    c = cfg.replace(p_com_max=db_to_linear(p_db), gamma_snr_min=g)
                    add(scheme, f"p_com_max={p_db:g}dBW", g, c, _resolve_psi(spec, c, scheme, seeds))
        elif spec.figure == "velocity_vs_pcom":
            c0 = cfg.replace(beta_c_1=db_to_linear(BETA_VELOCITY_DB), beta_c_2=db_to_linear(BETA_VELOCITY_DB))
            for g in VELOCITY_SNR_LEVELS:
                for p_db in spec.grid or PCOM_VELOCITY_GRID_DB:
                    c = c0.replace(p_com_max=db_to_linear(p_db), gamma_snr_min=g)
                    add(scheme, f"gamma_snr_min={g:g}", p_db, c, _resolve_psi(spec, c, scheme, seeds))
    return jobs


# ----------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_csv(path: Path, required=RUN_COLUMNS) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        return list(reader)


def aggregate(rows: list[dict]) -> list[dict]:
    groups = defaultdict(list)
    for r in rows:
        groups[(r["figure"], r["scheme"], r["group"], float(r["x"]))].append(r)
    out = []
    for (fig, scheme, group, x), rs in groups.items():
        rec = {"figure": fig, "scheme": scheme, "group": group, "x": x, "n": len(rs),
               "feasible_rate": float(np.mean([float(r["feasible"]) for r in rs]))}
        for m in METRICS:
            vals = np.array([float(r[m]) for r in rs])
            vals = vals[~np.isnan(vals)]
            rec[f"{m}_mean"] = float(vals.mean()) if vals.size else math.nan
            rec[f"{m}_std"] = float(vals.std()) if vals.size else math.nan
        out.append(rec)
    return out


def collect(spec: ExperimentSpec) -> tuple[list[dict], list[dict]]:
    """Run every job of the campaign and return (run rows, aggregate rows)."""
    jobs = build_jobs(spec)
    if not jobs:
        raise ExperimentError("empty_grid", "nothing to run")
    log.info("%s: %d runs", spec.figure, len(jobs))
    rows = _execute(jobs, spec.workers)
    if spec.figure == "convergence":
        rows = _pad_iterations(rows)
    return rows, aggregate(rows)


def write_outputs(out: Path, figure: str, rows: list[dict], agg: list[dict]) -> tuple[Path, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    runs_path = out / f"{figure}_runs.csv"
    agg_path = out / f"{figure}_aggregate.csv"
    write_csv(runs_path, RUN_COLUMNS, rows)
    write_csv(agg_path, AGGREGATE_COLUMNS, agg)
    return runs_path, agg_path


def check_feasible(rows: list[dict]) -> None:
    if not any(int(r["feasible"]) for r in rows):
        raise ExperimentError("infeasible_scenario", "no run produced a feasible plan")


def run_experiment(spec: ExperimentSpec) -> tuple[Path, Path]:
    """Run a campaign and write its CSV pair; results are flushed before any infeasibility error."""
    rows, agg = collect(spec)
    paths = write_outputs(spec.out, spec.figure, rows, agg)
    check_feasible(rows)
    return paths


# ----------------------------------------------------------------------------
# summary


def gain_percent(a: float, b: float) -> float:
    if b == 0:
        return math.inf if a > 0 else 0.0
    return (a - b) / b * 100.0


def final_coverages(rows: list[dict]) -> dict[str, list[float]]:
    """Final coverage per scheme: the last iteration of each realization."""
    last: dict[tuple, dict] = {}
    for r in rows:
        key = (r["scheme"], r["group"], r["realization"], r["x"] if r["figure"] != "convergence" else "")
        if key not in last or int(r["iteration"]) >= int(last[key]["iteration"]):
            last[key] = r
    out = defaultdict(list)
    for (scheme, *_), r in sorted(last.items()):
        out[scheme].append(float(r["coverage"]))
    return dict(out)


@dataclass(frozen=True)
class SchemeSummary:
    scheme: str
    n: int
    mean: float
    std: float
    gain_vs: dict


def summarize(csv_dir: str | os.PathLike) -> list[SchemeSummary]:
    """Mean final coverage per scheme and the proposed scheme's gain (%) over each other one."""
    csv_dir = Path(csv_dir)
    files = sorted(csv_dir.glob("*_runs.csv"))
    if not files:
        raise SchemaError(f"no *_runs.csv files in {csv_dir}")
    rows = [r for f in files for r in read_csv(f)]
    finals = final_coverages(rows)
    stats = {s: (len(v), float(np.mean(v)), float(np.std(v))) for s, v in finals.items()}
    out = []
    for s, (n, mean, std) in stats.items():
        gains = {o: gain_percent(mean, m) for o, (_, m, _) in stats.items() if o != s}
        out.append(SchemeSummary(s, n, mean, std, gains))
    order = {s.value: i for i, s in enumerate(Scheme)}
    out.sort(key=lambda x: order.get(x.scheme, 99))
    write_csv(csv_dir / "summary.csv", ("scheme", "n", "coverage_mean", "coverage_std", "gain_over"),
              [{"scheme": s.scheme, "n": s.n, "coverage_mean": s.mean, "coverage_std": s.std,
                "gain_over": ";".join(f"{k}:{v:.2f}%" for k, v in sorted(s.gain_vs.items()))} for s in out])
    return out


def format_summary(items: list[SchemeSummary]) -> str:
    lines = [f"{'scheme':<24}{'n':>5}{'mean [m^2]':>14}{'std':>12}"]
    for s in items:
        lines.append(f"{s.scheme:<24}{s.n:>5}{s.mean:>14.1f}{s.std:>12.1f}")
    prop = next((s for s in items if s.scheme == Scheme.PROPOSED.value), None)
    if prop is not None:
        for other, g in sorted(prop.gain_vs.items()):
            lines.append(f"gain of proposed over {other}: {g:.2f}%")
    return "\n".join(lines)
