"""Constrained particle swarm search for the slave UAV position."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import SlaveContext, is_feasible, penalty_sum
from .geometry_coverage import AcrossTrackPosition
from .scenario import ScenarioConfig


@dataclass
class SwarmState:
    pos: np.ndarray  # (D, 2): x2, z2
    vel: np.ndarray  # (D, 2)
    best_pos: np.ndarray
    best_cov: np.ndarray
    best_pen: np.ndarray
    best_feas: np.ndarray
    min_coverage: float
    k: int = 1

    def fitness(self, cov, pen, feas) -> np.ndarray:
        return np.where(feas, cov, self.min_coverage - pen)

    @property
    def best_fitness(self) -> np.ndarray:
        return self.fitness(self.best_cov, self.best_pen, self.best_feas)

    @property
    def global_index(self) -> int:
        return int(np.argmax(self.best_fitness))

    @property
    def global_best(self) -> np.ndarray:
        return self.best_pos[self.global_index]


@dataclass(frozen=True)
class PsoResult:
    q2: AcrossTrackPosition
    fitness: float
    coverage: float
    feasible: bool
    penalty: float
    iterations: int
    history: list = field(default_factory=list)

    @property
    def infeasible_everywhere(self) -> bool:
        return not self.feasible


def _score(ctx: SlaveContext, pos: np.ndarray):
    cov, g = ctx.evaluate(pos[:, 0], pos[:, 1])
    return cov, penalty_sum(g), is_feasible(g)


def _project(pos: np.ndarray, cfg: ScenarioConfig, pinned_theta: float | None) -> np.ndarray:
    if pinned_theta is not None:
        pos[:, 0] = cfg.x_t - pos[:, 1] * math.tan(pinned_theta)
    return pos


def init_swarm(ctx: SlaveContext, rng: np.random.Generator, n_particles: int | None = None,
               extra: AcrossTrackPosition | None = None, pinned_theta: float | None = None) -> SwarmState:
    cfg = ctx.cfg
    d = n_particles or cfg.pso_particles
    pos = np.column_stack([
        rng.uniform(cfg.x_t - cfg.pso_box_width, cfg.x_t, d),
        rng.uniform(cfg.z_min, cfg.z_max, d),
    ])
    vel = rng.uniform(0.0, cfg.v_pso_max, (d, 2))
    if extra is not None:
        pos = np.vstack([pos, [extra.x, extra.z]])
        vel = np.vstack([vel, rng.uniform(0.0, cfg.v_pso_max, (1, 2))])
    _project(pos, cfg, pinned_theta)
    cov, pen, feas = _score(ctx, pos)
    return SwarmState(pos=pos, vel=vel, best_pos=pos.copy(), best_cov=cov, best_pen=pen,
                      best_feas=feas, min_coverage=float(cov.min()))


def step_swarm(state: SwarmState, ctx: SlaveContext, rng: np.random.Generator, max_iter: int | None = None,
               c_1: float | None = None, c_2: float | None = None, pinned_theta: float | None = None) -> SwarmState:
    """One iteration: reflect, move, score, then update velocities and inertia."""
    cfg = ctx.cfg
    m1 = max_iter or cfg.pso_iters
    c_1 = cfg.c_1 if c_1 is None else c_1
    c_2 = cfg.c_2 if c_2 is None else c_2
    pos, vel = state.pos, state.vel

    # reflecting wall, tested on the position the particle is about to reach
    nxt = pos + vel
    vel[:, 0] = np.where(nxt[:, 0] > cfg.x_t, -vel[:, 0], vel[:, 0])
    vel[:, 1] = np.where((nxt[:, 1] > cfg.z_max) | (nxt[:, 1] < cfg.z_min), -vel[:, 1], vel[:, 1])
    pos += vel
    # a step longer than the distance to the opposite wall can still overshoot
    np.clip(pos[:, 0], None, cfg.x_t, out=pos[:, 0])
    np.clip(pos[:, 1], cfg.z_min, cfg.z_max, out=pos[:, 1])
    _project(pos, cfg, pinned_theta)

    cov, pen, feas = _score(ctx, pos)
    state.min_coverage = min(state.min_coverage, float(cov.min()))
    better = state.fitness(cov, pen, feas) > state.best_fitness
    state.best_pos[better] = pos[better]
    state.best_cov[better] = cov[better]
    state.best_pen[better] = pen[better]
    state.best_feas[better] = feas[better]

    w = 1.0 - (state.k - 1) / m1
    r_1 = rng.uniform(size=(len(pos), 1))
    r_2 = rng.uniform(size=(len(pos), 1))
    g = state.global_best
    state.vel = w * vel + c_1 * r_1 * (state.best_pos - pos) + c_2 * r_2 * (g[None, :] - pos)
    state.k += 1
    return state


def run_pso(ctx: SlaveContext, rng: np.random.Generator, warm_start: AcrossTrackPosition | None = None, *,
            n_particles: int | None = None, max_iter: int | None = None, patience: int | None = None,
            tol: float | None = None, pinned_theta: float | None = None) -> PsoResult:
    """Run the swarm until the best fitness stalls for `patience` iterations or `max_iter` is hit."""
    cfg = ctx.cfg
    m1 = max_iter or cfg.pso_iters
    patience = patience or cfg.pso_patience
    tol = cfg.eps_1 if tol is None else tol

    state = init_swarm(ctx, rng, n_particles, warm_start, pinned_theta)
    best = float(state.best_fitness.max())
    history = [best]
    stall = 0
    while state.k < m1:
        step_swarm(state, ctx, rng, m1, pinned_theta=pinned_theta)
        cur = float(state.best_fitness.max())
        stall = stall + 1 if abs(cur - best) <= tol * max(abs(best), 1.0) else 0
        best = cur
        history.append(cur)
        if stall >= patience:
            break

    i = state.global_index
    x2, z2 = state.best_pos[i]
    return PsoResult(
        q2=AcrossTrackPosition(float(x2), float(z2)),
        fitness=float(state.best_fitness[i]),
        coverage=float(state.best_cov[i]),
        feasible=bool(state.best_feas[i]),
        penalty=float(state.best_pen[i]),
        iterations=state.k,
        history=history,
    )
