"""Alternating optimisation over slave position, master altitude and resources."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import comms_energy as ce
from . import insar_metrics
from .constraints import (
    ConstraintReport,
    DecisionState,
    SlaveContext,
    evaluate_constraints,
    resources_feasible,
    state_coverage,
)
from .geometry_coverage import (
    AcrossTrackPosition,
    FormationState,
    baseline_components,
    coverage_upper_bound,
    slant_range,
    slave_look_angle,
    usable_swath,
)
from .opt_monotonic import solve_master
from .opt_pso import run_pso
from .opt_sca import powers_for_velocity, run_sca
from .scenario import DerivedConstants, ScenarioConfig, db_to_linear, derive_constants

log = logging.getLogger(__name__)

NO_PROGRESS_LIMIT = 3
FIXED_SPEED = 4.0
PINNED_THETA = math.pi / 4


class Scheme(str, enum.Enum):
    PROPOSED = "proposed"
    CLASSICAL_AO = "classical_ao"  # benchmark 1
    FIXED_STEADY_SPEED = "fixed_steady_speed"  # benchmark 2
    FIXED_SLAVE_LOOK_ANGLE = "fixed_slave_look_angle"  # benchmark 3

    @classmethod
    def from_benchmark(cls, value) -> "Scheme":
        table = {"none": cls.PROPOSED, "0": cls.PROPOSED, "1": cls.CLASSICAL_AO,
                 "2": cls.FIXED_STEADY_SPEED, "3": cls.FIXED_SLAVE_LOOK_ANGLE}
        key = str(value).lower()
        if key in table:
            return table[key]
        return cls(key)


def initial_state(cfg: ScenarioConfig, name: str = "F1") -> DecisionState:
    """Published starting points; both use 4 m/s and 7.78 dBW on every link."""
    points = {
        "F1": ((-40.0, 60.0), (-45.0, 50.0)),
        "F2": ((-20.0, 40.0), (-30.0, 40.0)),
    }
    try:
        (x1, z1), (x2, z2) = points[name.upper()]
    except KeyError:
        raise ValueError(f"unknown initial point {name!r}; expected one of {sorted(points)}") from None
    n = cfg.n_slots
    p = np.full(n, db_to_linear(7.78))
    return DecisionState(
        FormationState(AcrossTrackPosition(x1, z1), AcrossTrackPosition(x2, z2)),
        np.full(n, FIXED_SPEED), p.copy(), p.copy(),
    )


@dataclass(frozen=True)
class MetricAudit:
    coverage: float
    swath: float
    baseline: float
    b_perp: float
    theta_2: float
    h_amb: float
    delta_h_90: float
    gamma_snr_min_slot: float
    gamma_rg: float
    mean_velocity: float
    energy: tuple[float, float]
    min_rate_margin: float

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def audit(state: DecisionState, cfg: ScenarioConfig, consts: DerivedConstants) -> MetricAudit:
    from .constraints import resource_margins, snr_coherence_slots

    f = state.formation
    dec = baseline_components(f, cfg.theta_1)
    theta_2 = float(slave_look_angle(f.q2, cfg.x_t))
    r1 = float(slant_range(f.q1, cfg.x_t))
    h_amb = float(insar_metrics.height_of_ambiguity(r1, cfg.theta_1, np.asarray(dec.b_perp), cfg.wavelength))
    return MetricAudit(
        coverage=state_coverage(state, cfg),
        swath=float(usable_swath(f, cfg.theta_1, cfg.beamwidth, cfg.x_t)),
        baseline=dec.b, b_perp=dec.b_perp, theta_2=theta_2, h_amb=h_amb,
        delta_h_90=float(insar_metrics.worst_case_height_error(h_amb, cfg)),
        gamma_snr_min_slot=float(np.min(snr_coherence_slots(f, state.v, cfg, consts))),
        gamma_rg=float(insar_metrics.baseline_decorrelation(theta_2, cfg.theta_1, consts.b_p)),
        mean_velocity=float(np.mean(state.v[:-1])),
        energy=(ce.total_energy(state.p_com_1, state.v, cfg.p_t_1, cfg, consts),
                ce.total_energy(state.p_com_2, state.v, cfg.p_t_2, cfg, consts)),
        min_rate_margin=resource_margins(state, cfg, consts)["C11"],
    )


@dataclass
class IterationRecord:
    iteration: int
    coverage: float
    feasible: bool
    accepted: tuple[str, ...]
    state: DecisionState | None = None


@dataclass
class Solution:
    state: DecisionState
    coverage: float
    feasible: bool
    report: ConstraintReport
    metrics: MetricAudit | None
    iterations: int
    status: str
    psi: float
    scheme: Scheme
    history: list[IterationRecord] = field(default_factory=list)

    @property
    def score(self) -> float:
        """Coverage of a usable plan; an infeasible plan covers nothing."""
        return self.coverage if self.feasible else 0.0

    @property
    def coverage_history(self) -> list[float]:
        """Incumbent coverage after every iteration that held a feasible point."""
        return [h.coverage for h in self.history if h.feasible]


def _violation(report: ConstraintReport) -> float:
    """Scale-free infeasibility score, used only to stop runs that cannot be repaired."""
    total = 0.0
    for r in report.results.values():
        if r.margin < -1e-9:
            total += 1.0 + math.log1p(min(-r.margin, 1e12))
    return total


class _Incumbent:
    def __init__(self, state, cfg, consts):
        self.cfg, self.consts = cfg, consts
        self.set(state)

    def set(self, state):
        self.state = state
        self.report = evaluate_constraints(state, self.cfg, self.consts)
        self.feasible = self.report.all_satisfied
        self.coverage = state_coverage(state, self.cfg)

    def offer(self, cand: DecisionState) -> bool:
        """Once feasible, accept cand only if it stays feasible without losing coverage.

        Before that every block output is taken as is, so the blocks can move the
        formation away from an infeasible start together.
        """
        rep = evaluate_constraints(cand, self.cfg, self.consts)
        ok = rep.all_satisfied
        cov = state_coverage(cand, self.cfg)
        take = not self.feasible or (ok and cov >= self.coverage)
        if take:
            self.state, self.report, self.feasible, self.coverage = cand, rep, ok, cov
        return take


@dataclass(frozen=True)
class AoSettings:
    n_particles: int | None = None
    pso_iters: int | None = None
    max_iter: int | None = None
    eps: float | None = None


def _blend(inc: _Incumbent, sca_state: DecisionState, psi: float, cfg, consts) -> DecisionState:
    """Damped velocity step; falls back to the full SCA step if the blend is infeasible."""
    if psi >= 1.0:
        return sca_state
    v_prev = inc.state.v
    v = v_prev + psi * (sca_state.v - v_prev)
    cand = sca_state.replace(v=v)
    if resources_feasible(cand, cfg, consts):
        return cand
    cand = powers_for_velocity(cfg, consts, sca_state.formation, v)
    return sca_state if cand is None else cand


def run_ao(cfg: ScenarioConfig, psi: float | None = None, init: DecisionState | None = None,
           seed: int | np.random.SeedSequence | None = 0, scheme: Scheme | str = Scheme.PROPOSED,
           settings: AoSettings | None = None, consts: DerivedConstants | None = None) -> Solution:
    """psi-step alternating optimisation.

    Each outer iteration runs the warm-started swarm on the slave position,
    the polyblock search on the master altitude and the convex solver on
    velocity and powers, then moves the velocity only a fraction psi of the
    way towards the convex solution.
    """
    scheme = Scheme(scheme)
    settings = settings or AoSettings()
    consts = consts or derive_constants(cfg)
    if scheme is Scheme.CLASSICAL_AO:
        psi = 1.0
    psi = cfg.psi if psi is None else float(psi)
    if not 0.0 <= psi <= 1.0:
        raise ValueError("psi must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    state = init if init is not None else initial_state(cfg)
    if scheme is Scheme.FIXED_STEADY_SPEED:
        state = state.replace(v=np.full(cfg.n_slots, FIXED_SPEED))
    pinned = PINNED_THETA if scheme is Scheme.FIXED_SLAVE_LOOK_ANGLE else None
    if pinned is not None:
        q2 = state.q2
        state = state.replace(formation=FormationState(
            state.q1, AcrossTrackPosition(cfg.x_t - q2.z * math.tan(pinned), q2.z)))

    inc = _Incumbent(state, cfg, consts)
    max_iter = settings.max_iter or cfg.ao_max_iter
    eps = cfg.eps_4 if settings.eps is None else settings.eps
    history = [IterationRecord(0, inc.coverage, inc.feasible, (), inc.state)]
    status, stall = "max iterations", 0
    best_violation = math.inf

    for m in range(1, max_iter + 1):
        prev_cov, prev_feasible = inc.coverage, inc.feasible
        accepted = []

        # slave position
        ctx = SlaveContext(cfg, consts, inc.state.q1, inc.state.v, inc.state.p_com_2)
        pso = run_pso(ctx, rng, warm_start=inc.state.q2, n_particles=settings.n_particles,
                      max_iter=settings.pso_iters, pinned_theta=pinned)
        cand = inc.state.replace(formation=FormationState(inc.state.q1, pso.q2))
        if inc.offer(cand):
            accepted.append("slave")

        # master altitude
        try:
            mono = solve_master(cfg, consts, inc.state.q2, inc.state.v, inc.state.p_com_1)
        except ValueError as exc:  # empty normal set
            log.debug("master block skipped: %s", exc)
            mono = None
        if mono is not None and mono.feasible:
            if inc.offer(inc.state.replace(formation=FormationState(mono.q1, inc.state.q2))):
                accepted.append("master")

        # velocity and powers
        if scheme is Scheme.FIXED_STEADY_SPEED:
            cand = powers_for_velocity(cfg, consts, inc.state.formation, inc.state.v)
            if cand is not None and inc.offer(cand):
                accepted.append("power")
        else:
            sca = run_sca(cfg, consts, inc.state.formation, inc.state.v)
            if sca.feasible:
                sca_state = inc.state.replace(v=sca.v, p_com_1=sca.p_com_1, p_com_2=sca.p_com_2)
                cand = _blend(inc, sca_state, psi, cfg, consts)
                if inc.offer(cand):
                    accepted.append("resources")

        history.append(IterationRecord(m, inc.coverage, inc.feasible, tuple(accepted), inc.state))
        log.debug("AO %d: coverage %.3f feasible %s accepted %s", m, inc.coverage, inc.feasible, accepted)

        if inc.feasible and prev_feasible:
            change = abs(inc.coverage - prev_cov) / max(abs(inc.coverage), 1e-12)
            if change <= eps:
                status = "converged"
                break
        if inc.feasible:
            stall = stall + 1 if not accepted else 0
        else:
            score = _violation(inc.report)
            stall = 0 if score < best_violation - 1e-12 else stall + 1
            best_violation = min(best_violation, score)
        if stall >= NO_PROGRESS_LIMIT:
            status = "no progress"
            break

    metrics = audit(inc.state, cfg, consts) if inc.feasible else None
    if not inc.feasible:
        status = "infeasible"
    return Solution(inc.state, inc.coverage, inc.feasible, inc.report, metrics, m, status, psi, scheme, history)


def run_benchmark(scheme: Scheme | str, cfg: ScenarioConfig, init: DecisionState | None = None, seed=0,
                  psi: float | None = None, settings: AoSettings | None = None) -> Solution:
    return run_ao(cfg, psi=psi, init=init, seed=seed, scheme=scheme, settings=settings)


@dataclass(frozen=True)
class PsiSearch:
    psi: float
    mean_coverage: float
    grid: tuple[float, ...]
    means: tuple[float, ...]


def psi_grid(eps: float) -> np.ndarray:
    k = int(round(1.0 / eps))
    return np.round(np.linspace(0.0, 1.0, k + 1), 12)


def search_psi(cfg: ScenarioConfig, init: DecisionState | None = None, eps: float | None = None,
               seeds=(0,), scheme: Scheme | str = Scheme.PROPOSED, settings: AoSettings | None = None) -> PsiSearch:
    """Grid search over psi in [0, 1]; ties go to the smaller step."""
    eps = cfg.eps_5 if eps is None else eps
    consts = derive_constants(cfg)
    grid = psi_grid(eps)
    means = []
    for psi in grid:
        covs = [run_ao(cfg, float(psi), init, s, scheme, settings, consts).score for s in seeds]
        means.append(float(np.mean(covs)))
    best = int(np.argmax(means))  # first maximum, i.e. smallest psi
    return PsiSearch(float(grid[best]), means[best], tuple(map(float, grid)), tuple(means))


__all__ = [
    "AoSettings", "IterationRecord", "MetricAudit", "PsiSearch", "Scheme", "Solution",
    "audit", "coverage_upper_bound", "initial_state", "psi_grid", "run_ao", "run_benchmark", "search_psi",
]
