import math

import numpy as np
import pytest

from insarplan.constraints import SlaveContext, is_feasible
from insarplan.geometry_coverage import AcrossTrackPosition, coverage_upper_bound, master_position
from insarplan.opt_pso import init_swarm, run_pso, step_swarm


@pytest.fixture
def ctx(cfg, consts):
    q1 = master_position(69.12, cfg.x_t, cfg.theta_1)
    return SlaveContext(cfg, consts, q1, np.full(cfg.n_slots, 0.3), np.full(cfg.n_slots, 6.0))


def test_table_parameters(cfg):
    assert (cfg.pso_particles, cfg.pso_iters, cfg.c_1, cfg.c_2, cfg.v_pso_max) == (2000, 200, 0.1, 0.2, 20.0)


def test_init_box_and_warm_start(ctx, cfg):
    warm = AcrossTrackPosition(-42.43, 53.48)
    s = init_swarm(ctx, np.random.default_rng(0), 300, extra=warm)
    assert s.pos.shape == (301, 2)
    assert np.all((s.pos[:-1, 0] >= cfg.x_t - 500) & (s.pos[:-1, 0] <= cfg.x_t))
    assert np.all((s.pos[:, 1] >= cfg.z_min) & (s.pos[:, 1] <= cfg.z_max))
    assert np.all((s.vel >= 0) & (s.vel <= cfg.v_pso_max))
    assert tuple(s.pos[-1]) == (warm.x, warm.z)


def test_init_deterministic(ctx):
    a = init_swarm(ctx, np.random.default_rng(5), 50)
    b = init_swarm(ctx, np.random.default_rng(5), 50)
    assert np.array_equal(a.pos, b.pos) and np.array_equal(a.vel, b.vel)


def test_ballistic_with_reflection(ctx, cfg):
    s = init_swarm(ctx, np.random.default_rng(1), 40)
    s.k = 1
    for _ in range(10):
        before = s.pos.copy()
        vel = s.vel.copy()
        nxt = before + vel
        flip_x = nxt[:, 0] > cfg.x_t
        flip_z = (nxt[:, 1] > cfg.z_max) | (nxt[:, 1] < cfg.z_min)
        expected = before + np.where(np.column_stack([flip_x, flip_z]), -vel, vel)
        expected[:, 0] = np.minimum(expected[:, 0], cfg.x_t)
        expected[:, 1] = np.clip(expected[:, 1], cfg.z_min, cfg.z_max)
        step_swarm(s, ctx, np.random.default_rng(2), max_iter=10 ** 9, c_1=0.0, c_2=0.0)
        assert np.allclose(s.pos, expected)


def test_fixed_point(ctx):
    s = init_swarm(ctx, np.random.default_rng(1), 30)
    g = s.global_best.copy()
    s.pos[:] = g
    s.best_pos[:] = g
    s.vel[:] = 0.0
    step_swarm(s, ctx, np.random.default_rng(3))
    assert np.allclose(s.pos, g) and np.allclose(s.vel, 0.0)


def test_global_best_monotone(ctx, cfg):
    rng = np.random.default_rng(11)
    s = init_swarm(ctx, rng, 100, extra=AcrossTrackPosition(-42.43, 53.48))
    best = s.best_fitness.max()
    for _ in range(1000):
        if s.k >= 10 ** 6:
            break
        step_swarm(s, ctx, rng, max_iter=1000)
        cur = s.best_fitness.max()
        assert cur >= best - 1e-12
        best = cur
        z = s.pos[:, 1]
        assert np.all((z >= cfg.z_min) & (z <= cfg.z_max)) and np.all(s.pos[:, 0] <= cfg.x_t)


def test_trajectory_reproducible(ctx):
    a = run_pso(ctx, np.random.default_rng(9), n_particles=80, max_iter=30)
    b = run_pso(ctx, np.random.default_rng(9), n_particles=80, max_iter=30)
    assert a == b


def test_warm_start_dominance(ctx):
    warm = AcrossTrackPosition(-42.43, 53.48)
    cov, g = ctx.evaluate(warm.x, warm.z)
    assert is_feasible(g)[0]
    r = run_pso(ctx, np.random.default_rng(0), warm, n_particles=20, max_iter=5)
    assert r.feasible and r.fitness >= cov[0]


def test_against_grid_search(ctx, cfg):
    x, z = np.meshgrid(np.arange(cfg.x_t - 500, cfg.x_t + 0.5, 1.0), np.arange(cfg.z_min, cfg.z_max + 0.5, 1.0))
    cov, g = ctx.evaluate(x.ravel(), z.ravel())
    grid_best = cov[is_feasible(g)].max()
    r = run_pso(ctx, np.random.default_rng(0), n_particles=200, max_iter=50)
    assert r.feasible
    assert r.coverage >= 0.99 * grid_best
    assert r.coverage <= coverage_upper_bound(cfg)


def test_pinned_look_angle(ctx, cfg):
    r = run_pso(ctx, np.random.default_rng(0), n_particles=50, max_iter=20, pinned_theta=math.pi / 4)
    assert math.atan((cfg.x_t - r.q2.x) / r.q2.z) == pytest.approx(math.pi / 4, abs=1e-9)


def test_infeasible_everywhere_flag(cfg, consts):
    q1 = master_position(69.12, cfg.x_t, cfg.theta_1)
    ctx = SlaveContext(cfg, consts, q1, np.full(cfg.n_slots, 9.0), np.full(cfg.n_slots, 6.0))
    r = run_pso(ctx, np.random.default_rng(0), n_particles=50, max_iter=20)
    assert r.infeasible_everywhere and r.penalty > 0
