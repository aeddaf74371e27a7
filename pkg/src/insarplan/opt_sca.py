"""Velocity and communication-power allocation by successive convex approximation.

The induced-power term of the propulsion model is replaced by a slack u with
the side condition 1 + v^4/(4 v0^4) <= f(v, u), f = (u^2/P_I^2 + v^2/(2 v0^2))^2.
f is convex, so its tangent plane under-estimates it and the linearised
condition is a tightening: every iterate stays feasible for the exact model.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import cvxpy as cp
import numpy as np

from . import comms_energy as ce
from .constraints import DecisionState, resources_feasible
from .geometry_coverage import FormationState, along_track_positions, slant_range, slave_look_angle, usable_swath
from .scenario import DerivedConstants, ScenarioConfig

log = logging.getLogger(__name__)

_BUDGET_SHRINK = 1e-6  # relative energy head-room against solver tolerance
_POWER_PAD = 1e-9  # relative pad on the minimum C11 power


class ScaInfeasible(RuntimeError):
    pass


def c6_velocity_cap(formation: FormationState, cfg: ScenarioConfig, consts: DerivedConstants,
                    clip: bool = True) -> float:
    """Largest speed keeping the SNR coherence at gamma_snr_min.

    Solves (1 + s1 v)(1 + s2 v) = 1/gamma_min^2 with s_i = r_i^3 sin(theta_i) / gamma_r_i.
    """
    r1 = float(slant_range(formation.q1, cfg.x_t))
    r2 = float(slant_range(formation.q2, cfg.x_t))
    s1 = r1 ** 3 * math.sin(cfg.theta_1) / consts.gamma_r[0]
    s2 = r2 ** 3 * math.sin(slave_look_angle(formation.q2, cfg.x_t)) / consts.gamma_r[1]
    c = 1.0 / cfg.gamma_snr_min ** 2 - 1.0
    b = s1 + s2
    if b == 0:
        cap = math.inf
    else:
        cap = 2.0 * c / (b + math.sqrt(b * b + 4.0 * s1 * s2 * c))
    return min(cap, cfg.v_max) if clip else cap


# ----------------------------------------------------------------------------
# slack linearisation


def c12a_f(v, u, consts: DerivedConstants):
    g = np.asarray(u) ** 2 / consts.p_i ** 2 + np.asarray(v) ** 2 / (2 * consts.v_0 ** 2)
    return g * g


def c12a_grad(v, u, consts: DerivedConstants) -> tuple[np.ndarray, np.ndarray]:
    v, u = np.asarray(v, dtype=float), np.asarray(u, dtype=float)
    g = u ** 2 / consts.p_i ** 2 + v ** 2 / (2 * consts.v_0 ** 2)
    return 2 * g * v / consts.v_0 ** 2, 4 * g * u / consts.p_i ** 2


@dataclass(frozen=True)
class Linearization:
    v0: np.ndarray
    u0: np.ndarray
    f0: np.ndarray
    grad_v: np.ndarray
    grad_u: np.ndarray

    def __call__(self, v, u):
        return self.f0 + self.grad_v * (np.asarray(v) - self.v0) + self.grad_u * (np.asarray(u) - self.u0)


def linearize_c12a(v, u, consts: DerivedConstants) -> Linearization:
    v, u = np.asarray(v, dtype=float), np.asarray(u, dtype=float)
    gv, gu = c12a_grad(v, u, consts)
    return Linearization(v, u, c12a_f(v, u, consts), gv, gu)


# ----------------------------------------------------------------------------
# convex sub-problem


class ConvexSubproblem:
    """Parametrised convex program; compiled once per slot count and reused.

    Variables are held in scaled units (v / v0, u / P_I, p / P_com_max and
    energy over the available budget) so every coefficient is of order one.
    """

    def __init__(self, n: int):
        self.n = n
        self.vs = cp.Variable(n)
        self.us = cp.Variable(n, nonneg=True)
        self.ps = [cp.Variable(n, nonneg=True), cp.Variable(n, nonneg=True)]
        # ws = (y - g_y) / L for a track length scale L, its own variable so
        # the products stay DPP
        self.ws = cp.Variable(n)
        self.w_gain = cp.Parameter(nonneg=True)  # delta_t v0 / L

        self.v_lo = cp.Parameter(n)
        self.v_hi = cp.Parameter(n)
        self.gy_scaled = cp.Parameter()
        self.link_c = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.link_w = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.link_p = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.e_quad = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.e_cube = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.e_u = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.e_p = [cp.Parameter(nonneg=True), cp.Parameter(nonneg=True)]
        self.gv = cp.Parameter(n)
        self.gu = cp.Parameter(n)
        self.aff0 = cp.Parameter(n)

        lower = np.tril(np.ones((n, n)), k=-1)
        cons = [self.vs >= self.v_lo, self.vs <= self.v_hi, self.ws == self.w_gain * (lower @ self.vs) - self.gy_scaled]
        for i in range(2):
            cons += [
                self.ps[i] <= 1.0,
                self.link_c[i] + self.link_w[i] * cp.square(self.ws) <= self.link_p[i] * self.ps[i],
                self.e_quad[i] * cp.sum_squares(self.vs) + self.e_cube[i] * cp.sum(cp.power(self.vs, 3))
                + self.e_u[i] * cp.sum(self.us) + self.e_p[i] * cp.sum(self.ps[i]) <= 1.0,
            ]
        cons.append(1 + 0.25 * cp.power(self.vs, 4) - self.aff0
                    - cp.multiply(self.gv, self.vs) - cp.multiply(self.gu, self.us) <= 0)
        self.problem = cp.Problem(cp.Maximize(cp.sum(self.vs[: n - 1])), cons)
        self.scale = (1.0, 1.0, 1.0)

    def solve(self, **kw):
        try:
            with warnings.catch_warnings():
                # inaccurate solutions are accepted here; callers re-check feasibility exactly
                warnings.simplefilter("ignore", UserWarning)
                self.problem.solve(solver=cp.CLARABEL, warm_start=False, **kw)
        except cp.error.SolverError as exc:
            log.debug("solver error: %s", exc)
            return None
        if self.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.vs.value is None:
            return None
        v0, p_i, p_max = self.scale
        return (v0 * np.array(self.vs.value), p_i * np.array(self.us.value),
                p_max * np.array(self.ps[0].value), p_max * np.array(self.ps[1].value))


@lru_cache(maxsize=8)
def _subproblem(n: int) -> ConvexSubproblem:
    return ConvexSubproblem(n)


@dataclass
class ScaContext:
    cfg: ScenarioConfig
    consts: DerivedConstants
    formation: FormationState
    cap: float
    swath: float
    k: tuple[float, float]
    c0: tuple[float, float]
    r_min: tuple[float, float]

    @classmethod
    def build(cls, cfg, consts, formation: FormationState) -> "ScaContext":
        theta_2 = slave_look_angle(formation.q2, cfg.x_t)
        r_min = (float(ce.min_data_rate(formation.q1.z, cfg.theta_1, cfg)),
                 float(ce.min_data_rate(formation.q2.z, theta_2, cfg)))
        k = (float(ce.rate_snr_factor(r_min[0], cfg.b_c_1)), float(ce.rate_snr_factor(r_min[1], cfg.b_c_2)))
        c0 = tuple(float((q.x - cfg.g_x) ** 2 + (q.z - cfg.g_z) ** 2) for q in (formation.q1, formation.q2))
        return cls(cfg, consts, formation, c6_velocity_cap(formation, cfg, consts),
                   usable_swath(formation, cfg.theta_1, cfg.beamwidth, cfg.x_t), k, c0, r_min)

    def min_powers(self, v) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.cfg
        y = along_track_positions(v, cfg.delta_t)
        out = []
        for i, (beta, b_c) in enumerate(((cfg.beta_c_1, cfg.b_c_1), (cfg.beta_c_2, cfg.b_c_2))):
            d2 = self.c0[i] + (y - cfg.g_y) ** 2
            out.append(self.k[i] * d2 / beta * (1.0 + _POWER_PAD))
        return out[0], out[1]

    def spend_energy(self, v, p1, p2) -> tuple[np.ndarray, np.ndarray]:
        """Raise both links towards P_com_max as far as each battery allows.

        Coverage does not depend on power, so any energy left over is spent on
        link margin that the position blocks can then use.
        """
        cfg, consts = self.cfg, self.consts
        out = []
        for p, p_t, e_max in ((p1, cfg.p_t_1, cfg.e_max_1), (p2, cfg.p_t_2, cfg.e_max_2)):
            room = np.clip(cfg.p_com_max - p, 0.0, None)
            spare = e_max * (1.0 - _BUDGET_SHRINK) - ce.total_energy(p, v, p_t, cfg, consts)
            need = cfg.delta_t * float(room.sum())
            tau = 0.0 if spare <= 0 or need == 0 else min(1.0, spare / need)
            out.append(p + tau * room)
        return out[0], out[1]

    def state(self, v, p1, p2) -> DecisionState:
        return DecisionState(self.formation, np.asarray(v, dtype=float), np.asarray(p1), np.asarray(p2))

    def objective(self, v) -> float:
        return self.swath * float(np.sum(np.asarray(v)[:-1])) * self.cfg.delta_t


def _load(sub: ConvexSubproblem, ctx: ScaContext, lin: Linearization, v_lo, v_hi):
    cfg, consts = ctx.cfg, ctx.consts
    n, v0, p_i, p_max, dt = sub.n, consts.v_0, consts.p_i, cfg.p_com_max, cfg.delta_t
    sub.scale = (v0, p_i, p_max)
    sub.v_lo.value = np.broadcast_to(v_lo, (n,)).astype(float) / v0
    sub.v_hi.value = np.broadcast_to(v_hi, (n,)).astype(float) / v0
    length = max(abs(cfg.g_y), n * dt * float(np.max(v_hi)), 1.0)
    sub.w_gain.value = dt * v0 / length
    sub.gy_scaled.value = cfg.g_y / length
    sub.gv.value = lin.grad_v * v0
    sub.gu.value = lin.grad_u * p_i
    sub.aff0.value = lin.f0 - lin.grad_v * lin.v0 - lin.grad_u * lin.u0
    quad = dt * 3 * consts.p_0 / cfg.u_tip ** 2 * v0 ** 2
    cube = dt * 0.5 * cfg.d_0 * cfg.rho * cfg.solidity * cfg.a_e * v0 ** 3
    betas = (cfg.beta_c_1, cfg.beta_c_2)
    e_max = (cfg.e_max_1, cfg.e_max_2)
    p_t = (cfg.p_t_1, cfg.p_t_2)
    for i in range(2):
        k = ctx.k[i] * (1.0 + _POWER_PAD)
        sub.link_c[i].value = k * ctx.c0[i] / p_max
        sub.link_w[i].value = k * length ** 2 / p_max
        sub.link_p[i].value = betas[i]
        budget = e_max[i] * (1.0 - _BUDGET_SHRINK) - dt * n * (consts.p_0 + p_t[i])
        if budget <= 0:
            budget = 1e-12  # leaves the sub-problem infeasible, as it should be
        sub.e_quad[i].value = quad / budget
        sub.e_cube[i].value = cube / budget
        sub.e_u[i].value = dt * p_i / budget
        sub.e_p[i].value = dt * p_max / budget


@dataclass
class ScaResult:
    v: np.ndarray
    p_com_1: np.ndarray
    p_com_2: np.ndarray
    u: np.ndarray
    coverage: float
    feasible: bool
    iterations: int
    status: str
    history: list = field(default_factory=list)


def _finalize(ctx: ScaContext, v, v_hi) -> DecisionState | None:
    cfg = ctx.cfg
    v = np.clip(v, cfg.v_min, v_hi)
    p1, p2 = ctx.min_powers(v)
    if not resources_feasible(ctx.state(v, p1, p2), cfg, ctx.consts):
        return None
    st = ctx.state(v, *ctx.spend_energy(v, p1, p2))
    return st if resources_feasible(st, cfg, ctx.consts) else ctx.state(v, p1, p2)


def _repair(ctx: ScaContext, v_new, v_ref, v_hi) -> DecisionState | None:
    st = _finalize(ctx, v_new, v_hi)
    if st is not None or v_ref is None:
        return st
    tau = 0.5
    for _ in range(30):
        st = _finalize(ctx, v_ref + tau * (np.asarray(v_new) - v_ref), v_hi)
        if st is not None:
            return st
        tau *= 0.5
    return None


def run_sca(cfg: ScenarioConfig, consts: DerivedConstants, formation: FormationState, v_init,
            eps: float | None = None, max_iter: int | None = None) -> ScaResult:
    """Successive convex approximation for velocity and powers at a fixed formation."""
    eps = cfg.eps_3 if eps is None else eps
    max_iter = max_iter or cfg.sca_max_iter
    ctx = ScaContext.build(cfg, consts, formation)
    n = cfg.n_slots
    if ctx.cap < cfg.v_min:
        return _failed(cfg, v_init, "SNR cap below v_min")
    v_hi = ctx.cap
    sub = _subproblem(n)

    starts = [np.clip(np.asarray(v_init, dtype=float), cfg.v_min, v_hi), np.full(n, cfg.v_min)]
    for attempt, v_k in enumerate(starts):
        inc = _finalize(ctx, v_k, v_hi)  # feasible incumbent, if the start is one
        u_k = ce.induced_power(v_k, consts)
        history = [ctx.objective(inc.v)] if inc is not None else []
        status = "max iterations"
        it = 0
        while it < max_iter:
            it += 1
            lin = linearize_c12a(v_k, u_k, consts)
            _load(sub, ctx, lin, cfg.v_min, v_hi)
            sol = sub.solve()
            if sol is None:
                status = "subproblem infeasible"
                break
            v_new, u_new, _, _ = sol
            cand = _repair(ctx, v_new, None if inc is None else inc.v, v_hi)
            if cand is None:
                status = "repair failed"
                break
            obj = ctx.objective(cand.v)
            prev = history[-1] if history else None
            if prev is not None and obj < prev:
                status = "converged"  # no further ascent
                break
            inc = cand
            history.append(obj)
            v_k = cand.v
            u_k = np.maximum(np.clip(u_new, 0, None), ce.induced_power(v_k, consts))
            if prev is not None and abs(obj - prev) < eps * max(abs(obj), 1e-12):
                status = "converged"
                break
        if inc is not None:
            return ScaResult(inc.v, inc.p_com_1, inc.p_com_2, u_k, ctx.objective(inc.v), True, it, status, history)
        log.debug("SCA start %d failed (%s)", attempt, status)
    return _failed(cfg, v_init, status)


def _failed(cfg, v_init, status) -> ScaResult:
    v = np.asarray(v_init, dtype=float)
    nan = np.full_like(v, np.nan)
    return ScaResult(v, nan, nan, nan, 0.0, False, 0, status, [])


def powers_for_velocity(cfg, consts, formation, v) -> DecisionState | None:
    """Feasible powers for a frozen velocity profile, or None if there are none."""
    ctx = ScaContext.build(cfg, consts, formation)
    return _finalize(ctx, np.asarray(v, dtype=float), np.inf)
