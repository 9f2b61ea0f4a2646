from pathlib import Path

import numpy as np

from bochner.grid import GridSpec
from flow.state import stability_bound
from reports import experiments
from reports.config import build_manifold, flow_config, load_config, parse_config

DATA_DIR = Path(__file__).resolve().parents[2] / "data"


def _sphere_flow(energy_monitor=True):
    return parse_config({
        "experiment": {"kind": "flow", "name": "torus-to-sphere", "seed": 11},
        "manifold": {"kind": "flat_torus", "dim": 2},
        "target": {"kind": "round_sphere", "dim": 2, "radius": 1.0},
        "map": {"kind": "constant", "value": [0.2, -0.1]},
        "flow": {"dt": 7e-4, "max_steps": 3000, "tau_tol": 1e-8, "resolution": 16,
                 "perturbation": 1e-3, "K": 1.0, "energy_monitor": energy_monitor},
    })


def _checks(outcome):
    return {c.name: c for c in outcome.checks}


def test_torus_flow_fixture_runs_on_a_64_grid_within_the_stability_bound():
    config = load_config(DATA_DIR / "flow_torus.toml")
    flow = flow_config(config)
    assert flow.resolution == 64
    source = build_manifold(config.block("manifold"), "manifold")
    assert flow.dt <= stability_bound(GridSpec.torus(2, flow.resolution), source)
    # the slowest mode needs t of about 0.5 to bring sup|tau| from 4 down to 1e-8
    assert flow.dt * flow.max_steps >= 1.0


def test_collapsing_sphere_flow_reports_the_final_energy():
    outcome = experiments.run_flow_experiment(_sphere_flow())
    checks = _checks(outcome)
    assert outcome.results["verdict"]["verdict"] == "ConstantMap"
    energy = checks["flow.final_energy"]
    assert energy.passed
    assert energy.value <= 1e-10
    assert energy.tolerance == 1e-10
    assert all(c.passed for c in outcome.checks)


def test_final_energy_is_not_applicable_without_the_monitor():
    check = _checks(experiments.run_flow_experiment(_sphere_flow(energy_monitor=False)))["flow.final_energy"]
    assert check.comparison == "n/a"
    assert check.passed


def test_degenerate_sectional_samples_are_not_applicable(monkeypatch):
    def degenerate(bundle, xs, ys):
        return np.full(len(xs), np.nan)

    monkeypatch.setattr(experiments, "sectional_samples", degenerate)
    config = parse_config({
        "experiment": {"kind": "curvature", "name": "s2", "seed": 1},
        "manifold": {"kind": "round_sphere", "dim": 2, "radius": 1.0},
        "curvature": {"samples": 3, "planes_per_point": 2},
    })
    outcome = experiments.run_curvature(config)
    assert outcome.tables["curvature"]["sectional_error"].isna().all()
    checks = _checks(outcome)
    assert checks["curvature.sectional_oracle"].comparison == "n/a"
    assert checks["curvature.sectional_oracle"].passed
    assert checks["curvature.ricci_oracle"].passed
