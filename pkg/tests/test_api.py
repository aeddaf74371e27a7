import pytest
from fastapi.testclient import TestClient

from insarplan import __version__
from insarplan.api import app
from insarplan.scenario import ScenarioConfig, parse_scenario

SMALL = {"pso_particles": 30, "pso_iters": 10}


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    assert client.get("/health").json() == {"status": "ok", "version": __version__}


def test_default_scenario_round_trips(client):
    body = client.get("/scenario/default").json()
    assert body["values"]["n_slots"] == 80
    assert body["kinds"]["n_slots"] == "count"
    assert parse_scenario(body["text"]) == ScenarioConfig()


def test_metrics_of_feasible_plan(client, cfg):
    from insarplan.geometry_coverage import master_position

    q1 = master_position(69.12, cfg.x_t, cfg.theta_1)
    req = {"q1": {"x": q1.x, "z": q1.z}, "q2": {"x": -42.43, "z": 53.48}, "v": 0.3, "p_com_1": 6.0, "p_com_2": 6.0}
    body = client.post("/metrics", json=req).json()
    assert body["feasible"] is True
    assert all(c["satisfied"] for c in body["constraints"].values())
    assert body["coverage"] == pytest.approx(body["metrics"]["swath"] * 0.3 * 79)


def test_metrics_reports_violations(client):
    req = {"q1": {"x": -40, "z": 60}, "q2": {"x": -45, "z": 50}}
    body = client.post("/metrics", json=req).json()
    assert body["feasible"] is False
    assert body["constraints"]["C6"]["satisfied"] is False
    assert body["constraints"]["C6"]["margin"] < 0


def test_metrics_bad_vector_length(client):
    req = {"q1": {"x": -40, "z": 60}, "q2": {"x": -45, "z": 50}, "v": [1.0, 2.0]}
    assert client.post("/metrics", json=req).status_code == 422


def test_unknown_override_rejected(client):
    r = client.post("/solve", json={"overrides": {"warp_factor": 9}})
    assert r.status_code == 422
    assert "warp_factor" in r.text


def test_unknown_scheme_rejected(client):
    assert client.post("/solve", json={"scheme": "7", "overrides": SMALL}).status_code == 422


def test_solve_matches_library(client, cfg):
    from insarplan.ao_driver import AoSettings, Scheme, initial_state, run_ao

    body = client.post("/solve", json={"psi": 0.5, "seed": 2, "overrides": SMALL}).json()
    small = cfg.replace(**SMALL, realizations=20)
    sol = run_ao(small, 0.5, initial_state(small), 2, Scheme.PROPOSED, AoSettings(30, 10))
    assert body["coverage"] == sol.score
    assert body["v"] == sol.state.v.tolist()
    assert body["scheme"] == "proposed"
    assert body["coverage_history"] == sol.coverage_history


def test_experiment_endpoint(client, tmp_path):
    req = {"figure": "convergence", "realizations": 1, "psi": 0.5, "benchmark": "2", "overrides": SMALL}
    body = client.post("/experiments", json=req).json()
    assert body["figure"] == "convergence"
    assert body["runs"] and body["aggregate"]
    assert {r["scheme"] for r in body["runs"]} == {"fixed_steady_speed"}


def test_experiment_reports_infeasible(client):
    req = {"figure": "convergence", "realizations": 1, "psi": 0.5, "benchmark": "3", "overrides": SMALL}
    body = client.post("/experiments", json=req).json()
    assert body["error"] == "infeasible_scenario"
    assert all(r["coverage"] == 0.0 for r in body["runs"])


@pytest.mark.parametrize("req", [
    {"figure": "fig9"},
    {"figure": "convergence", "benchmark": "5"},
    {"figure": "convergence", "realizations": 0},
    {"figure": "convergence", "scenario_text": "n_slots = -3"},
])
def test_experiment_validation(client, req):
    assert client.post("/experiments", json=req).status_code == 422
