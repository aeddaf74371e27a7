import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insarplan.geometry_coverage import (
    AcrossTrackPosition,
    FormationState,
    GeometryError,
    baseline_components,
    coverage,
    coverage_upper_bound,
    master_position,
    master_x_from_altitude,
    perpendicular_baseline,
    single_swath,
    slant_range,
    slave_look_angle,
    swath_edges,
    usable_swath,
)

TH1 = math.pi / 4
BEAM = math.pi / 6
coord = st.floats(-300, 300, allow_nan=False)
alt = st.floats(1, 200, allow_nan=False)


def test_vertical_baseline(reference_formation):
    bd = baseline_components(reference_formation, TH1)
    assert bd.b == pytest.approx(10.0)
    assert bd.alpha == pytest.approx(-math.pi / 2)
    assert bd.b_perp == pytest.approx(7.0710678, rel=1e-7)


def test_coincident_baseline():
    q = AcrossTrackPosition(1.0, 2.0)
    bd = baseline_components(FormationState(q, q), TH1)
    assert (bd.b, bd.b_perp, bd.b_par, bd.alpha) == (0.0, 0.0, 0.0, 0.0)


@settings(max_examples=200)
@given(coord, alt, coord, alt, st.floats(0.05, 1.5))
def test_pythagorean_closure(x1, z1, x2, z2, th):
    bd = baseline_components(FormationState(AcrossTrackPosition(x1, z1), AcrossTrackPosition(x2, z2)), th)
    assert bd.b >= 0
    assert math.isclose(bd.b_perp ** 2 + bd.b_par ** 2, bd.b ** 2, rel_tol=1e-9, abs_tol=1e-12)


@settings(max_examples=100)
@given(alt, coord, alt)
def test_perpendicular_baseline_independent_of_master_altitude(z1, x2, z2):
    q1 = master_position(z1, 20.0, TH1)
    q2 = AcrossTrackPosition(x2, z2)
    bd = baseline_components(FormationState(q1, q2), TH1)
    assert bd.b_perp == pytest.approx(float(perpendicular_baseline(q2, TH1, 20.0)), rel=1e-9, abs=1e-9)


def test_slant_range():
    assert float(slant_range(AcrossTrackPosition(-80, 100), 20)) == pytest.approx(math.sqrt(20000))
    assert float(slant_range(AcrossTrackPosition(20, 37.5), 20)) == 37.5


@settings(max_examples=100)
@given(st.floats(1, 100))
def test_master_range_on_line_of_sight(z1):
    q1 = master_position(z1, 20.0, TH1)
    r1 = float(slant_range(q1, 20.0))
    assert abs(r1 - z1 / math.cos(TH1)) < 1e-9 * r1


def test_master_x():
    assert master_x_from_altitude(100, 20, TH1) == pytest.approx(-80)
    assert master_x_from_altitude(0, 20, TH1) == 20
    assert master_x_from_altitude(57, 20, 0.0) == 20


def test_slave_look_angle():
    assert math.degrees(slave_look_angle(AcrossTrackPosition(-80, 90), 20)) == pytest.approx(48.0128, abs=1e-4)
    assert slave_look_angle(AcrossTrackPosition(20, 50), 20) == 0.0
    z = 33.0
    q = AcrossTrackPosition(20 - z * math.tan(TH1), z)
    assert slave_look_angle(q, 20) == pytest.approx(TH1, abs=1e-15)
    with pytest.raises(GeometryError):
        slave_look_angle(AcrossTrackPosition(0, 0), 20)


def test_usable_swath_reference(reference_formation):
    near1, far1 = swath_edges(reference_formation.q1, TH1, BEAM)
    th2 = slave_look_angle(reference_formation.q2, 20)
    near2, far2 = swath_edges(reference_formation.q2, th2, BEAM)
    assert (near1, far1) == pytest.approx((-22.265, 93.205), abs=1e-3)
    assert (near2, far2) == pytest.approx((-21.55, 96.63), abs=0.15)
    assert usable_swath(reference_formation, TH1, BEAM, 20) == pytest.approx(114.8, rel=1e-3)


def test_full_overlap_swath():
    q = master_position(50, 20, TH1)
    s = usable_swath(FormationState(q, q), TH1, BEAM, 20)
    expected = 50 * (math.tan(TH1 + BEAM / 2) - math.tan(TH1 - BEAM / 2))
    assert s == pytest.approx(expected, rel=1e-12)


def test_footprints_always_contain_target():
    # both beams are steered at the target line, so the overlap is never empty
    q1 = master_position(100, 20, TH1)
    for q2 in (AcrossTrackPosition(19, 1), AcrossTrackPosition(-100, 150), AcrossTrackPosition(-300, 99)):
        assert usable_swath(FormationState(q1, q2), TH1, BEAM, 20) > 0


def test_grazing_rejected():
    with pytest.raises(GeometryError):
        swath_edges(AcrossTrackPosition(0, 10), math.radians(80), BEAM)


@settings(max_examples=200)
@given(st.floats(1, 100), st.floats(-200, 20), st.floats(1, 100))
def test_usable_swath_bounded_by_each_footprint(z1, x2, z2):
    q1 = master_position(z1, 20.0, TH1)
    q2 = AcrossTrackPosition(x2, z2)
    th2 = slave_look_angle(q2, 20.0)
    if th2 + BEAM / 2 >= math.pi / 2 - 1e-6:
        return
    s = usable_swath(FormationState(q1, q2), TH1, BEAM, 20.0)
    assert 0 <= s <= min(single_swath(q1, TH1, BEAM), single_swath(q2, th2, BEAM)) + 1e-9


def test_coverage_examples():
    v = np.full(80, 4.0)
    assert coverage(100.0, v, 1.0) == pytest.approx(31600.0)
    assert coverage(100.0, np.zeros(80), 1.0) == 0.0
    assert coverage(100.0, 2 * v, 1.0) == pytest.approx(2 * coverage(100.0, v, 1.0))


@settings(max_examples=100)
@given(st.lists(st.floats(0, 10), min_size=2, max_size=50), st.integers(0, 48), st.floats(0, 5))
def test_coverage_monotone_in_velocity(v, i, bump):
    v = np.array(v)
    i = i % len(v)
    w = v.copy()
    w[i] += bump
    assert coverage(50.0, w, 1.0) >= coverage(50.0, v, 1.0)


def test_upper_bound(cfg, feasible_state):
    s = usable_swath(feasible_state.formation, cfg.theta_1, cfg.beamwidth, cfg.x_t)
    bound = single_swath(feasible_state.q1, cfg.theta_1, cfg.beamwidth) * np.sum(feasible_state.v[:-1])
    assert coverage(s, feasible_state.v, cfg.delta_t) <= bound + 1e-9
    assert coverage(s, feasible_state.v, cfg.delta_t) <= coverage_upper_bound(cfg)
