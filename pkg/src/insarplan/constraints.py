"""Constraint evaluation, PSO violation penalties and the PSO fitness.

Margins are signed and in each constraint's native unit (m, rad, bit/s, J,
unitless coherence); a constraint holds when its margin is >= -TOL.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import comms_energy as ce
from . import insar_metrics
from .geometry_coverage import (
    AcrossTrackPosition,
    FormationState,
    GeometryError,
    along_track_positions,
    baseline_length,
    slant_range,
    slave_look_angle,
    travelled_distance,
    usable_swath,
)
from .scenario import DerivedConstants, ScenarioConfig

TOL = 1e-9
CONSTRAINT_IDS = tuple(f"C{i}" for i in range(1, 16))
PENALTY_IDS = (3, 5, 6, 7, 8, 9, 11, 14)
# stands in for infinite violations (grazing beam, zero baseline) so that
# penalties stay comparable
PENALTY_CAP = 1e15
# (P.1.c) constraints, the ones a velocity/power update can break
RESOURCE_CONSTRAINTS = ("C6", "C10", "C11", "C12", "C13")


@dataclass(frozen=True)
class DecisionState:
    formation: FormationState
    v: np.ndarray
    p_com_1: np.ndarray
    p_com_2: np.ndarray

    def __post_init__(self):
        n = len(self.v)
        if len(self.p_com_1) != n or len(self.p_com_2) != n:
            raise ValueError("v, p_com_1 and p_com_2 must have equal length")

    @property
    def q1(self) -> AcrossTrackPosition:
        return self.formation.q1

    @property
    def q2(self) -> AcrossTrackPosition:
        return self.formation.q2

    def replace(self, **kw) -> "DecisionState":
        d = {"formation": self.formation, "v": self.v, "p_com_1": self.p_com_1, "p_com_2": self.p_com_2}
        d.update(kw)
        return DecisionState(**d)


@dataclass(frozen=True)
class ConstraintResult:
    margin: float
    cause: str = ""

    @property
    def satisfied(self) -> bool:
        return self.margin >= -TOL


@dataclass(frozen=True)
class ConstraintReport:
    results: dict[str, ConstraintResult] = field(default_factory=dict)

    def __getitem__(self, key: str) -> ConstraintResult:
        return self.results[key]

    @property
    def all_satisfied(self) -> bool:
        return all(r.satisfied for r in self.results.values())

    def satisfied(self, ids=CONSTRAINT_IDS, tol: float = TOL) -> bool:
        return all(self.results[i].margin >= -tol for i in ids)

    def violated(self) -> list[str]:
        return [k for k, r in self.results.items() if not r.satisfied]

    def margins(self) -> dict[str, float]:
        return {k: r.margin for k, r in self.results.items()}


def snr_coherence_slots(formation: FormationState, v, cfg: ScenarioConfig, consts: DerivedConstants) -> np.ndarray:
    r1 = slant_range(formation.q1, cfg.x_t)
    r2 = slant_range(formation.q2, cfg.x_t)
    theta_2 = slave_look_angle(formation.q2, cfg.x_t)
    with np.errstate(divide="ignore"):
        s1 = consts.gamma_r[0] / (np.asarray(v) * r1 ** 3 * math.sin(cfg.theta_1))
        s2 = consts.gamma_r[1] / (np.asarray(v) * r2 ** 3 * math.sin(theta_2))
    return insar_metrics.snr_coherence(s1, s2)


def resource_margins(state: DecisionState, cfg: ScenarioConfig, consts: DerivedConstants) -> dict[str, float]:
    """Margins of the velocity/power constraints C6, C10, C11, C12, C13."""
    f = state.formation
    v = np.asarray(state.v, dtype=float)
    out = {}
    out["C6"] = float(np.min(snr_coherence_slots(f, v, cfg, consts) - cfg.gamma_snr_min))
    p = np.concatenate([state.p_com_1, state.p_com_2])
    out["C10"] = float(min(np.min(p), np.min(cfg.p_com_max - p)))
    y = along_track_positions(v, cfg.delta_t)
    c11 = []
    thetas = (cfg.theta_1, slave_look_angle(f.q2, cfg.x_t))
    for q, theta, p_com, b_c, beta in ((f.q1, thetas[0], state.p_com_1, cfg.b_c_1, cfg.beta_c_1),
                                       (f.q2, thetas[1], state.p_com_2, cfg.b_c_2, cfg.beta_c_2)):
        try:
            r_min = ce.min_data_rate(q.z, theta, cfg)
        except GeometryError:
            c11.append(-math.inf)
            continue
        rate = ce.throughput(p_com, ce.gs_distance(q, y, cfg.gs), b_c, beta)
        c11.append(float(np.min(rate - r_min)))
    out["C11"] = min(c11)
    e1 = ce.total_energy(state.p_com_1, v, cfg.p_t_1, cfg, consts)
    e2 = ce.total_energy(state.p_com_2, v, cfg.p_t_2, cfg, consts)
    out["C12"] = min(cfg.e_max_1 - e1, cfg.e_max_2 - e2)
    out["C13"] = float(min(np.min(v - cfg.v_min), np.min(cfg.v_max - v)))
    return out


def evaluate_constraints(state: DecisionState, cfg: ScenarioConfig, consts: DerivedConstants) -> ConstraintReport:
    f = state.formation
    q1, q2 = f.q1, f.q2
    res: dict[str, ConstraintResult] = {}

    res["C1"] = ConstraintResult(min(q1.z - cfg.z_min, cfg.z_max - q1.z, q2.z - cfg.z_min, cfg.z_max - q2.z))
    res["C2"] = ConstraintResult(-abs(q1.x - (cfg.x_t - q1.z * math.tan(cfg.theta_1))))
    r1 = float(slant_range(q1, cfg.x_t))
    r2 = float(slant_range(q2, cfg.x_t))
    res["C3"] = ConstraintResult(r1 - r2)
    res["C4"] = ConstraintResult(cfg.x_t - q2.x)
    res["C5"] = ConstraintResult(float(baseline_length(q1, q2)) - cfg.b_min)

    if q2.z <= 0 or q1.z <= 0:
        for cid in ("C6", "C7", "C8", "C9", "C11", "C14"):
            res[cid] = ConstraintResult(-math.inf, "non-positive altitude")
        rm = resource_margins_safe(state, cfg, consts)
        res["C10"], res["C12"], res["C13"] = (ConstraintResult(rm[k]) for k in ("C10", "C12", "C13"))
        res["C15"] = ConstraintResult(0.0)
        return ConstraintReport(dict(sorted(res.items(), key=lambda kv: int(kv[0][1:]))))

    theta_2 = slave_look_angle(q2, cfg.x_t)
    rm = resource_margins(state, cfg, consts)
    res["C6"] = ConstraintResult(rm["C6"])
    res["C7"] = ConstraintResult(insar_metrics.baseline_decorrelation(theta_2, cfg.theta_1, consts.b_p) - cfg.gamma_rg_min)

    b_perp = abs((q2.x - q1.x) * math.cos(cfg.theta_1) + (q2.z - q1.z) * math.sin(cfg.theta_1))
    if b_perp > 0:
        h_amb = insar_metrics.height_of_ambiguity(r1, cfg.theta_1, b_perp, cfg.wavelength)
        res["C8"] = ConstraintResult(h_amb - cfg.h_amb_min)
        dh = float(insar_metrics.worst_case_height_error(h_amb, cfg))
        res["C9"] = ConstraintResult(cfg.delta_h_max - dh)
    else:
        res["C8"] = ConstraintResult(math.inf, "zero perpendicular baseline: no height sensitivity")
        res["C9"] = ConstraintResult(-math.inf, "zero perpendicular baseline: unbounded height error")

    res["C10"] = ConstraintResult(rm["C10"])
    res["C11"] = ConstraintResult(rm["C11"], "" if math.isfinite(rm["C11"]) else "grazing beam")
    res["C12"] = ConstraintResult(rm["C12"])
    res["C13"] = ConstraintResult(rm["C13"])
    res["C14"] = ConstraintResult(min(theta_2 - cfg.theta_min, cfg.theta_max - theta_2))
    res["C15"] = ConstraintResult(0.0)  # slave look angle is derived from q2
    return ConstraintReport(dict(sorted(res.items(), key=lambda kv: int(kv[0][1:]))))


def resource_margins_safe(state, cfg, consts) -> dict[str, float]:
    v = np.asarray(state.v, dtype=float)
    p = np.concatenate([state.p_com_1, state.p_com_2])
    e1 = ce.total_energy(state.p_com_1, v, cfg.p_t_1, cfg, consts)
    e2 = ce.total_energy(state.p_com_2, v, cfg.p_t_2, cfg, consts)
    return {
        "C10": float(min(np.min(p), np.min(cfg.p_com_max - p))),
        "C12": min(cfg.e_max_1 - e1, cfg.e_max_2 - e2),
        "C13": float(min(np.min(v - cfg.v_min), np.min(cfg.v_max - v))),
    }


def resources_feasible(state: DecisionState, cfg: ScenarioConfig, consts: DerivedConstants, tol: float = TOL) -> bool:
    """Feasibility for the velocity/power sub-problem at a fixed formation."""
    return all(m >= -tol for m in resource_margins(state, cfg, consts).values())


def state_coverage(state: DecisionState, cfg: ScenarioConfig) -> float:
    try:
        s = usable_swath(state.formation, cfg.theta_1, cfg.beamwidth, cfg.x_t)
    except GeometryError:
        return 0.0
    return s * travelled_distance(state.v, cfg.delta_t)


# ----------------------------------------------------------------------------
# slave placement: vectorised penalties and fitness


class SlaveContext:
    """Everything fixed while the slave position is optimised.

    ``evaluate(x2, z2)`` scores whole arrays of candidate positions at once.
    """

    def __init__(self, cfg: ScenarioConfig, consts: DerivedConstants, q1: AcrossTrackPosition,
                 v, p_com_2):
        self.cfg, self.consts = cfg, consts
        self.q1 = q1
        self.v = np.asarray(v, dtype=float)
        self.p_com_2 = np.asarray(p_com_2, dtype=float)
        self.y = along_track_positions(self.v, cfg.delta_t)
        self.travel = travelled_distance(self.v, cfg.delta_t)
        self.r1 = float(slant_range(q1, cfg.x_t))
        half = cfg.beamwidth / 2
        self.near1 = q1.x + q1.z * math.tan(cfg.theta_1 - half)
        self.far1 = q1.x + q1.z * math.tan(cfg.theta_1 + half)
        with np.errstate(divide="ignore"):
            snr1 = consts.gamma_r[0] / (self.v * self.r1 ** 3 * math.sin(cfg.theta_1))
        self.inv1 = 1.0 + 1.0 / snr1  # per slot
        self.dphi = insar_metrics.delta_phi_90(cfg.gamma_worst, cfg.n_looks)

    def evaluate(self, x2, z2) -> tuple[np.ndarray, dict[int, np.ndarray]]:
        """Coverage and penalties g_l for candidate slave positions."""
        cfg, consts = self.cfg, self.consts
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        z2 = np.atleast_1d(np.asarray(z2, dtype=float))
        half = cfg.beamwidth / 2

        theta_2 = np.arctan((cfg.x_t - x2) / z2)
        r2 = np.hypot(x2 - cfg.x_t, z2)
        near2 = x2 + z2 * np.tan(theta_2 - half)
        hi = theta_2 + half
        grazing = hi >= math.pi / 2
        far2 = np.where(grazing, np.inf, x2 + z2 * np.tan(np.where(grazing, 0.0, hi)))
        swath = np.maximum(np.minimum(self.far1, far2) - np.maximum(self.near1, near2), 0.0)
        cov = swath * self.travel

        dx, dz = x2 - self.q1.x, z2 - self.q1.z
        b = np.hypot(dx, dz)
        b_perp = np.abs(dx * math.cos(cfg.theta_1) + dz * math.sin(cfg.theta_1))

        g = {}
        g[3] = np.maximum(r2 - self.r1, 0.0)
        g[5] = np.maximum(cfg.b_min - b, 0.0)
        with np.errstate(divide="ignore"):
            snr2 = consts.gamma_r[1] / (self.v[None, :] * (r2 ** 3 * np.sin(theta_2))[:, None])
            gamma_snr = 1.0 / np.sqrt(self.inv1[None, :] * (1.0 + 1.0 / snr2))
        g[6] = np.maximum(cfg.gamma_snr_min - gamma_snr, 0.0).sum(axis=1)
        g[7] = np.maximum(cfg.gamma_rg_min - insar_metrics.baseline_decorrelation(theta_2, cfg.theta_1, consts.b_p), 0.0)
        with np.errstate(divide="ignore"):
            h_amb = np.where(b_perp > 0, cfg.wavelength * self.r1 * math.sin(cfg.theta_1) / b_perp, np.inf)
        g[8] = np.maximum(cfg.h_amb_min - h_amb, 0.0)
        g[9] = np.minimum(np.maximum(h_amb * self.dphi / (2 * math.pi) - cfg.delta_h_max, 0.0), PENALTY_CAP)

        lo = theta_2 - half
        window = np.where(grazing, np.inf,
                          1.0 / np.cos(np.where(grazing, 0.0, hi)) - 1.0 / np.cos(lo))
        r_min = cfg.n_b * cfg.b_rg * cfg.prf * (z2 / cfg.c * window + cfg.tau_p)
        d2 = (x2[:, None] - cfg.g_x) ** 2 + (self.y[None, :] - cfg.g_y) ** 2 + (z2[:, None] - cfg.g_z) ** 2
        rate = cfg.b_c_2 * np.log2(1.0 + self.p_com_2[None, :] * cfg.beta_c_2 / d2)
        g[11] = np.minimum(np.maximum(r_min[:, None] - rate, 0.0).sum(axis=1), PENALTY_CAP)
        g[14] = np.maximum(cfg.theta_min - theta_2, 0.0) + np.maximum(theta_2 - cfg.theta_max, 0.0)
        return cov, g


def violation_penalties(q2: AcrossTrackPosition, ctx: SlaveContext) -> dict[int, float]:
    _, g = ctx.evaluate(q2.x, q2.z)
    return {k: float(v[0]) for k, v in g.items()}


def penalty_sum(g: dict[int, np.ndarray]) -> np.ndarray:
    return sum(g[k] for k in PENALTY_IDS)


def is_feasible(g: dict[int, np.ndarray], tol: float = TOL) -> np.ndarray:
    return np.all(np.stack([g[k] for k in PENALTY_IDS]) <= tol, axis=0)


def fitness(coverage, g: dict[int, np.ndarray], min_coverage: float) -> np.ndarray:
    """Coverage for feasible candidates; worst coverage seen minus total violation otherwise."""
    coverage = np.asarray(coverage, dtype=float)
    return np.where(is_feasible(g), coverage, min_coverage - penalty_sum(g))


class FitnessTracker:
    """Fitness with the running minimum coverage over every candidate ever evaluated."""

    def __init__(self, ctx: SlaveContext):
        self.ctx = ctx
        self.min_coverage = math.inf
        self.evaluations = 0

    def __call__(self, x2, z2):
        cov, g = self.ctx.evaluate(x2, z2)
        self.min_coverage = min(self.min_coverage, float(np.min(cov)))
        self.evaluations += cov.size
        feas = is_feasible(g)
        return np.where(feas, cov, self.min_coverage - penalty_sum(g)), cov, feas, g
