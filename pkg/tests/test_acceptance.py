"""Acceptance checks; each criterion prints one PASS/FAIL line.

Run through pytest (``pytest tests/test_acceptance.py -s``) or directly with
``python tests/test_acceptance.py`` for the report alone. Criteria 6 to 8 run
desk-scale Monte-Carlo campaigns and take a few minutes together.
"""

from __future__ import annotations

import math
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import master_contexts, mc_delta_phi_90  # noqa: E402

from insarplan import comms_energy as ce  # noqa: E402
from insarplan import insar_metrics  # noqa: E402
from insarplan.ao_driver import AoSettings, Scheme, initial_state, run_ao  # noqa: E402
from insarplan.constraints import evaluate_constraints, snr_coherence_slots  # noqa: E402
from insarplan.cli_experiments import ExperimentSpec, collect, desk_config, realization_seeds  # noqa: E402
from insarplan.geometry_coverage import (  # noqa: E402
    AcrossTrackPosition,
    FormationState,
    master_position,
    slant_range,
    usable_swath,
)
from insarplan.opt_monotonic import transform_p1b  # noqa: E402
from insarplan.scenario import ScenarioConfig, derive_constants  # noqa: E402
from insarplan.opt_sca import c12a_f, c6_velocity_cap, linearize_c12a, run_sca  # noqa: E402

pytestmark = pytest.mark.slow

REALIZATIONS = 20
SEED = 0
TREND_NOISE = 1e-3  # relative band for run-to-run swarm noise in trend checks


REPORT: list[str] = []  # printed by the terminal summary hook in conftest


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    REPORT.append(line)
    print(line)


def _check(n: int, checks: dict[str, bool], detail: str) -> None:
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(n, ok, detail + (f" | failed: {', '.join(failed)}" if failed else ""))
    assert ok, f"criterion {n}: {failed} ({detail})"


@pytest.fixture(scope="module")
def cfg():
    return ScenarioConfig()


@pytest.fixture(scope="module")
def desk(cfg):
    return desk_config(cfg)


def _campaign(figure, cfg, **kw):
    spec = ExperimentSpec(figure=figure, cfg=cfg, realizations=REALIZATIONS, seed=SEED, **kw)
    t = time.perf_counter()
    rows, agg = collect(spec)
    return rows, agg, time.perf_counter() - t


def _non_increasing(xs) -> bool:
    return all(b <= a + TREND_NOISE * max(abs(a), 1e-12) for a, b in zip(xs, xs[1:]))


def _non_decreasing(xs) -> bool:
    return _non_increasing([-x for x in xs])


# ----------------------------------------------------------------------------


def test_criterion_1_golden_metrics(cfg):
    t = time.perf_counter()
    c = derive_constants(cfg)
    hover = ce.propulsion_power(0.0, cfg, c)
    ref = FormationState(AcrossTrackPosition(-80.0, 100.0), AcrossTrackPosition(-80.0, 90.0))
    r1 = float(slant_range(ref.q1, cfg.x_t))
    h_amb = float(insar_metrics.height_of_ambiguity(r1, cfg.theta_1, 10 * math.cos(cfg.theta_1), cfg.wavelength))
    swath = float(usable_swath(ref, cfg.theta_1, cfg.beamwidth, cfg.x_t))
    elapsed = time.perf_counter() - t
    checks = {
        "hover": math.isclose(hover, 468.5, rel_tol=5e-3),
        "v0": math.isclose(c.v_0, 6.98, rel_tol=5e-3),
        "P0": math.isclose(c.p_0, 7.99, rel_tol=5e-3),
        "PI": math.isclose(c.p_i, 460.5, rel_tol=5e-3),
        "h_amb": math.isclose(h_amb, 1.697, rel_tol=1e-3),
        "swath": math.isclose(swath, 114.8, rel_tol=1e-3),
        "runtime": elapsed < 1.0,
    }
    _check(1, checks, f"hover {hover:.2f} W, v0 {c.v_0:.4f}, P0 {c.p_0:.4f}, PI {c.p_i:.2f}, "
                      f"h_amb {h_amb:.4f} m, swath {swath:.2f} m, {elapsed:.3f} s")


def test_criterion_2_phase_statistics():
    t = time.perf_counter()
    worst, worst_norm = 0.0, 0.0
    grid, h = insar_metrics.phase_grid()
    for gamma in (0.512, 0.7, 0.9):
        for n_looks in (4, 16):
            worst = max(worst, abs(insar_metrics.delta_phi_90(gamma, n_looks) - mc_delta_phi_90(gamma, n_looks)))
            mass = float(np.sum(insar_metrics.phase_error_pdf(grid, gamma, n_looks))) * h
            worst_norm = max(worst_norm, abs(mass - 1.0))
    elapsed = time.perf_counter() - t
    checks = {"dphi90": worst <= 1e-2, "normalization": worst_norm <= 1e-6, "runtime": elapsed < 30}
    _check(2, checks, f"max |dphi90 - MC| {worst:.2e} rad, max |int pdf - 1| {worst_norm:.1e}, {elapsed:.1f} s")


def test_criterion_3_master_oracle(cfg):
    c = derive_constants(cfg)
    t = time.perf_counter()
    contexts = master_contexts(cfg, c, 25)
    bad, worst = 0, 0.0
    for q2, v, p, z, cov, res in contexts:
        if not res.feasible or z is None:
            bad += 1
            continue
        pr = transform_p1b(cfg, c, q2, v, p)
        grid_slope = abs(pr.coverage(z + 0.01) - pr.coverage(z)) + abs(pr.coverage(z) - pr.coverage(max(z - 0.01, 0.0)))
        gap = abs(res.coverage - cov)
        worst = max(worst, gap / (cfg.eps_1 * cov + grid_slope))
        bad += gap > cfg.eps_1 * cov + grid_slope
    elapsed = time.perf_counter() - t
    checks = {"equivalence": bad == 0, "count": len(contexts) >= 25, "runtime": elapsed < 120}
    _check(3, checks, f"{len(contexts)} contexts, {bad} outside tolerance, worst gap/tol {worst:.3f}, {elapsed:.1f} s")


def test_criterion_4_sca(cfg):
    c = derive_constants(cfg)
    rng = np.random.default_rng(4)
    formations = [FormationState(master_position(69.12, cfg.x_t, cfg.theta_1), AcrossTrackPosition(-42.43, 53.48))]
    for _ in range(40):
        formations.append(FormationState(master_position(rng.uniform(5, 100), cfg.x_t, cfg.theta_1),
                                         AcrossTrackPosition(rng.uniform(-150, 0), rng.uniform(5, 100))))
    root_err = 0.0
    for f in formations:
        cap = c6_velocity_cap(f, cfg, c, clip=False)
        root_err = max(root_err, abs(snr_coherence_slots(f, np.array([cap]), cfg, c)[0] - cfg.gamma_snr_min))

    energy_margin, monotone, runs = math.inf, True, 0
    for scenario in (cfg, cfg.replace(gamma_snr_min=1e-6)):
        for start in (0.2, 4.0):
            res = run_sca(scenario, c, formations[0], np.full(cfg.n_slots, start))
            if not res.feasible:
                monotone = False
                continue
            runs += 1
            h = np.asarray(res.history)
            monotone &= bool(np.all(np.diff(h) >= -1e-9 * np.abs(h[1:])))
            for p, p_t, e_max in ((res.p_com_1, cfg.p_t_1, scenario.e_max_1), (res.p_com_2, cfg.p_t_2, scenario.e_max_2)):
                energy_margin = min(energy_margin, e_max - ce.total_energy(p, res.v, p_t, scenario, c))

    v = rng.uniform(0.1, 10, 30)
    u = rng.uniform(50, 500, 30)
    lin = linearize_c12a(v, u, c)
    hv, hu = 1e-5 * v, 1e-5 * u
    fd_v = (c12a_f(v + hv, u, c) - c12a_f(v - hv, u, c)) / (2 * hv)
    fd_u = (c12a_f(v, u + hu, c) - c12a_f(v, u - hu, c)) / (2 * hu)
    grad_err = max(np.max(np.abs(lin.grad_v / fd_v - 1)), np.max(np.abs(lin.grad_u / fd_u - 1)))
    checks = {"energy": energy_margin >= -1e-6, "monotone": monotone, "cap_root": root_err <= 1e-9,
              "gradient": grad_err <= 1e-6}
    _check(4, checks, f"{runs} SCA runs, min C12 margin {energy_margin:.3g} J, cap root error {root_err:.1e}, "
                      f"gradient rel error {grad_err:.1e}")


def test_criterion_5_ao(desk):
    c = derive_constants(desk)
    settings = AoSettings(n_particles=desk.pso_particles, pso_iters=desk.pso_iters)
    t = time.perf_counter()
    nondecreasing = feasible = converged = 0
    for seed in realization_seeds(SEED, REALIZATIONS):
        sol = run_ao(desk, desk.psi, initial_state(desk), seed, Scheme.PROPOSED, settings, c)
        h = sol.coverage_history
        nondecreasing += all(b >= a for a, b in zip(h, h[1:]))
        rep = evaluate_constraints(sol.state, desk, c)
        feasible += sol.feasible and all(r.margin >= -1e-6 for r in rep.results.values())
        converged += sol.iterations <= 50 and sol.status == "converged"
    elapsed = time.perf_counter() - t
    n = REALIZATIONS
    checks = {"monotone": nondecreasing == n, "feasible": feasible == n, "converged": converged == n}
    _check(5, checks, f"{n} runs (N={desk.n_slots}, D={desk.pso_particles}, M1={desk.pso_iters}): "
                      f"{nondecreasing} monotone, {feasible} feasible, {converged} converged, {elapsed:.0f} s")


def test_criterion_6_scheme_ordering(desk):
    rows, _, elapsed = _campaign("convergence", desk, psi="auto", benchmark="all", psi_step=0.05)
    last = {}
    for r in rows:
        key = (r["scheme"], r["realization"])
        if key not in last or r["iteration"] >= last[key]["iteration"]:
            last[key] = r
    cov = defaultdict(list)
    for (scheme, _), r in last.items():
        cov[scheme].append(r["coverage"])
    mean = {s: float(np.mean(v)) for s, v in cov.items()}
    p, b1, b2, b3 = (mean[s.value] for s in Scheme)

    def gain(x):
        return math.inf if x == 0 else (p - x) / x * 100

    psi = {r["scheme"]: r["psi"] for r in rows}
    checks = {
        "proposed>=b1": p >= b1,
        "b1>=max(b2,b3)": b1 >= max(b2, b3),
        "largest margin over b2": gain(b2) >= max(gain(b1), gain(b3)),
        "proposed>b1 by 5%": gain(b1) >= 5.0,
        "runtime": elapsed <= 1800,
    }
    _check(6, checks, f"mean coverage proposed {p:.1f} (psi {psi['proposed']:g}), b1 {b1:.1f}, b2 {b2:.1f}, "
                      f"b3 {b3:.1f}; gains {gain(b1):.2f}% / {gain(b2):.2f}% / {gain(b3):.2f}%, {elapsed:.0f} s")


def test_criterion_7_coverage_vs_snr(desk):
    _, agg, elapsed = _campaign("coverage_vs_snr_min", desk)
    series = defaultdict(dict)
    for a in agg:
        series[a["group"]][a["x"]] = a["coverage_mean"]
    grid = sorted(next(iter(series.values())))
    lo, hi = sorted(series, key=lambda g: float(g.split("=")[1].rstrip("dBW")))
    curves = {g: [series[g][x] for x in grid] for g in series}
    gap = [abs(series[hi][x] - series[lo][x]) / max(series[hi][x], series[lo][x], 1e-12) for x in grid]
    checks = {f"non-increasing {g}": _non_increasing(v) for g, v in curves.items()}
    checks["P_com sensitivity shrinks at highest threshold"] = gap[-1] < max(gap[:-1])
    text = "; ".join(f"{g}: " + ", ".join(f"{v:.0f}" for v in vals) for g, vals in curves.items())
    _check(7, checks, f"grid {grid}; {text}; relative P_com gap " + ", ".join(f"{x:.3f}" for x in gap)
           + f"; {elapsed:.0f} s")


def test_criterion_8_velocity_vs_pcom(desk):
    _, agg, elapsed = _campaign("velocity_vs_pcom", desk)
    series = defaultdict(dict)
    for a in agg:
        series[float(a["group"].split("=")[1])][a["x"]] = a["mean_velocity_mean"]
    levels = sorted(series)
    powers = sorted(series[levels[0]])
    checks = {f"non-decreasing in P_com at {g}": _non_decreasing([series[g][p] for p in powers]) for g in levels}
    for p in powers:
        vals = [series[g][p] for g in levels]
        checks[f"decreasing in threshold at {p:g} dBW"] = all(b < a for a, b in zip(vals, vals[1:]))
    text = "; ".join(f"{g}: " + ", ".join(f"{series[g][p]:.3f}" for p in powers) for g in levels)
    _check(8, checks, f"P_com {powers} dBW; mean velocity {text}; {elapsed:.0f} s")


def test_criterion_9_determinism(tmp_path):
    from insarplan.cli import main

    commands = [
        ["run", "--figure", "convergence", "--benchmark", "all", "--realizations", "2", "--psi", "0.43"],
        ["run", "--figure", "step_size", "--realizations", "1", "--psi-step", "0.5"],
        ["run", "--figure", "baseline_vs_pcom", "--realizations", "1", "--seed", "99"],
    ]
    identical = 0
    for i, argv in enumerate(commands):
        outs = [tmp_path / f"{i}{tag}" for tag in "ab"]
        for out in outs:
            main([*argv, "--out", str(out)])
        files = sorted(p.name for p in outs[0].glob("*.csv"))
        identical += bool(files) and all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    _check(9, {"byte-identical": identical == len(commands)}, f"{identical}/{len(commands)} commands reproduced byte for byte")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
