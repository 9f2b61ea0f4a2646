import numpy as np
import pytest

from geometry.manifolds import ManifoldKind, metric_at
from reports.config import (
    SEED_ENV,
    Tolerances,
    build_manifold,
    build_map,
    flow_config,
    load_config,
    parse_config,
    resolve_seed,
)
from utils.errors import ConfigError


@pytest.fixture
def curvature_raw():
    return {
        "experiment": {"kind": "curvature", "name": "s2", "seed": 7},
        "manifold": {"kind": "round_sphere", "dim": 2, "radius": 2.0},
        "curvature": {"samples": 5},
    }


# ---------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------
def test_seed_flag_beats_environment_and_config(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "9")
    assert resolve_seed(7, flag=3) == 3
    assert resolve_seed(7) == 9


def test_seed_falls_back_to_config_then_zero():
    assert resolve_seed(7) == 7
    assert resolve_seed(None) == 0


def test_seed_environment_must_be_an_integer(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "seven")
    with pytest.raises(ConfigError) as e:
        resolve_seed(7)
    assert e.value.field == SEED_ENV


def test_parse_config_applies_seed_flag(curvature_raw, monkeypatch):
    assert parse_config(curvature_raw).seed == 7
    monkeypatch.setenv(SEED_ENV, "11")
    assert parse_config(curvature_raw).seed == 11
    assert parse_config(curvature_raw, seed=2).seed == 2


# ---------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------
def test_unknown_key_is_named(curvature_raw):
    curvature_raw["manifold"]["radiu"] = 1.0
    with pytest.raises(ConfigError) as e:
        parse_config(curvature_raw)
    assert e.value.field == "manifold.radiu"
    assert str(e.value).startswith("manifold.radiu:")


def test_unknown_table_and_factor_key(curvature_raw):
    with pytest.raises(ConfigError) as e:
        parse_config({**curvature_raw, "extras": {}})
    assert e.value.field == "extras"

    curvature_raw["manifold"] = {"kind": "product", "factors": [{"kind": "flat_torus", "dim": 1},
                                                                 {"kind": "round_sphere", "colour": 1}]}
    with pytest.raises(ConfigError) as e:
        parse_config(curvature_raw)
    assert e.value.field == "manifold.factors[1].colour"


def test_kind_must_match_subcommand(curvature_raw):
    with pytest.raises(ConfigError) as e:
        parse_config(curvature_raw, expected_kind="flow")
    assert e.value.field == "experiment.kind"
    assert parse_config(curvature_raw, expected_kind="curvature").kind == "curvature"


def test_kind_aliases_and_unknown_kind(curvature_raw):
    raw = {"experiment": {"kind": "lemma-campaign"}, "lemma": {"m": 3, "n": 2}}
    assert parse_config(raw).kind == "lemma"
    curvature_raw["experiment"]["kind"] = "ricci-flow"
    with pytest.raises(ConfigError):
        parse_config(curvature_raw)


def test_missing_manifold_block():
    with pytest.raises(ConfigError) as e:
        parse_config({"experiment": {"kind": "curvature"}})
    assert e.value.field == "manifold"


@pytest.mark.parametrize("dt", [-1e-4, 0.0])
def test_flow_rejects_non_positive_dt(dt):
    raw = {
        "experiment": {"kind": "flow"},
        "manifold": {"kind": "flat_torus", "dim": 2},
        "map": {"kind": "linear_torus", "matrix": [[1.0, 0.0], [0.0, 1.0]]},
        "flow": {"dt": dt},
    }
    with pytest.raises(ConfigError) as e:
        parse_config(raw)
    assert e.value.field == "flow.dt"


def test_flow_config_reads_block():
    raw = {
        "experiment": {"kind": "flow", "seed": 4},
        "manifold": {"kind": "flat_torus", "dim": 2},
        "flow": {"dt": 1e-4, "max_steps": 10, "resolution": 8, "perturbation": 1e-3},
        "tolerances": {"flow.tau_tol": 1e-6},
    }
    flow = flow_config(parse_config(raw))
    assert (flow.dt, flow.max_steps, flow.resolution, flow.seed) == (1e-4, 10, 8, 4)
    assert flow.tau_tol == 1e-6


def test_missing_file_and_bad_toml(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(tmp_path / "absent.toml")
    assert e.value.field == "config"

    broken = tmp_path / "broken.toml"
    broken.write_text("[experiment\nkind = 'curvature'\n")
    with pytest.raises(ConfigError) as e:
        load_config(broken)
    assert e.value.field == "config"


def test_load_config_overrides(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        '[experiment]\nkind = "curvature"\nseed = 1\n\n'
        '[manifold]\nkind = "flat_torus"\ndim = 2\n'
    )
    config = load_config(path, seed=5, tol_scale=10.0, output_dir=str(tmp_path / "out"))
    assert config.seed == 5
    assert config.output_dir == tmp_path / "out"
    assert config.source == path
    assert config.echo()["tol_scale"] == 10.0


# ---------------------------------------------------------------------
# Tolerances
# ---------------------------------------------------------------------
def test_tolerances_scale_overrides_and_record():
    tol = Tolerances(overrides={"a": 1e-6}, scale=10.0)
    assert tol.get("a", 1e-9) == pytest.approx(1e-5)
    assert tol.get("b", 1e-9) == pytest.approx(1e-8)
    assert tol.fixed("order", 1.9) == 1.9
    assert set(tol.used) == {"a", "b", "order"}


@pytest.mark.parametrize("scale", [0.0, -1.0, float("nan")])
def test_tol_scale_must_be_positive(curvature_raw, scale):
    with pytest.raises(ConfigError) as e:
        parse_config(curvature_raw, tol_scale=scale)
    assert e.value.field == "tol_scale"


def test_negative_tolerance_rejected(curvature_raw):
    curvature_raw["tolerances"] = {"curvature.symmetry": -1.0}
    with pytest.raises(ConfigError) as e:
        parse_config(curvature_raw)
    assert e.value.field == "tolerances.curvature.symmetry"


# ---------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------
def test_build_manifold_options():
    sphere = build_manifold({"kind": "round_sphere", "dim": 2, "radius": 2.0, "scale": 4.0})
    assert sphere.kind == ManifoldKind.ROUND_SPHERE
    np.testing.assert_allclose(metric_at(sphere, np.zeros(2)), 16.0 * np.eye(2))

    prod = build_manifold({"kind": "product", "factors": [{"kind": "flat_torus", "dim": 1},
                                                          {"kind": "round_sphere", "dim": 2}]})
    assert prod.dim == 3


@pytest.mark.parametrize(
    "block,field",
    [
        ({"kind": "klein_bottle"}, "manifold.kind"),
        ({"kind": "round_sphere", "radius": -1.0}, "manifold.radius"),
        ({"kind": "round_sphere", "radius": "big"}, "manifold.radius"),
        ({"kind": "flat_torus", "dim": 2, "lattice": [[1.0, 0.0]]}, "manifold.lattice"),
        ({"kind": "flat_torus", "derivatives": "symbolic"}, "manifold.derivatives"),
        ({"kind": "product", "factors": [{"kind": "flat_torus"}]}, "manifold.factors"),
    ],
)
def test_build_manifold_errors(block, field):
    with pytest.raises(ConfigError) as e:
        build_manifold(block)
    assert e.value.field == field


def test_build_map_kinds():
    torus = build_manifold({"kind": "flat_torus", "dim": 2})
    phi = build_map({"kind": "linear_torus", "matrix": [[1.0, 0.0], [0.0, 2.0]]}, torus, None)
    assert phi.source is torus and phi.target is torus

    with pytest.raises(ConfigError) as e:
        build_map({"kind": "linear_torus"}, torus, None)
    assert e.value.field == "map.matrix"
    with pytest.raises(ConfigError) as e:
        build_map({"kind": "spiral"}, torus, None)
    assert e.value.field == "map.kind"
