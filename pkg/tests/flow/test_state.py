import numpy as np
import pytest
from numpy.testing import assert_allclose

from flow.state import (
    FlowConfig,
    discrete_energy,
    initial_state,
    place_in_charts,
    stability_bound,
    state_fields,
)
from bochner.grid import GridSpec
from geometry.manifolds import flat_torus, hyperbolic_disk, round_sphere
from maps.models import constant_map, custom_map, identity_map, linear_torus_map, perturbed_torus_map
from utils.errors import ConfigError, DomainError


@pytest.fixture
def torus():
    return flat_torus(2)


@pytest.mark.parametrize("overrides,field", [
    (dict(dt=-1.0), "flow.dt"),
    (dict(dt=float("nan")), "flow.dt"),
    (dict(dt=1e-4, max_steps=-1), "flow.max_steps"),
    (dict(dt=1e-4, tau_tol=0.0), "flow.tau_tol"),
    (dict(dt=1e-4, resolution=2), "flow.resolution"),
    (dict(dt=1e-4, perturbation=-0.1), "flow.perturbation"),
])
def test_flow_config_validation_names_the_field(overrides, field):
    with pytest.raises(ConfigError) as excinfo:
        FlowConfig(**overrides).validate()
    assert excinfo.value.field == field
    assert str(excinfo.value).startswith(f"{field}:")


def test_stability_bound_uses_physical_spacing():
    grid = GridSpec.torus(2, 10)
    assert stability_bound(grid, flat_torus(2)) == pytest.approx(0.2 * 0.01)
    assert stability_bound(grid, flat_torus(2, np.diag([0.5, 2.0]))) == pytest.approx(0.2 * 0.01 * 0.25)
    assert stability_bound(GridSpec.torus(3, 10), flat_torus(3)) == pytest.approx(0.2 * 0.01 * 2 / 3)


def test_initial_state_rejects_unstable_steps(torus):
    phi = perturbed_torus_map(torus, torus)
    with pytest.raises(ConfigError) as excinfo:
        initial_state(phi, FlowConfig(dt=1e-2, resolution=16))
    assert excinfo.value.field == "flow.dt"


def test_initial_state_rejects_unsupported_pairs(torus):
    with pytest.raises(ConfigError) as excinfo:
        initial_state(identity_map(round_sphere(2)), FlowConfig(dt=1e-5))
    assert excinfo.value.field == "manifold.kind"
    lifted = custom_map(torus, torus, lambda x: x, differential=lambda x: np.eye(2),
                        hessian=lambda x: np.zeros((2, 2, 2)))
    with pytest.raises(ConfigError) as excinfo:
        initial_state(lifted, FlowConfig(dt=1e-4, resolution=8))
    assert excinfo.value.field == "map.matrix"


def test_linear_map_state_has_zero_tension_and_lattice_energy(torus):
    A = np.array([[1.0, 0.0], [1.0, 2.0]])
    state = initial_state(linear_torus_map(torus, torus, A, offset=[0.3, 0.1]), FlowConfig(dt=1e-4, resolution=8))
    fields = state_fields(state)
    assert np.max(fields["tension_norm"]) < 1e-9
    assert_allclose(fields["dphi"][3, 5], A, atol=1e-12)
    assert_allclose(fields["energy"], np.sum(A ** 2), rtol=1e-12)
    assert discrete_energy(state) == pytest.approx(np.sum(A ** 2))


def test_perturbation_is_seeded(torus):
    phi = constant_map(torus, round_sphere(2), [0.2, -0.1])
    config = FlowConfig(dt=1e-4, resolution=8, perturbation=1e-3, seed=5)
    a, b = initial_state(phi, config), initial_state(phi, config)
    assert_allclose(a.values, b.values)
    assert np.std(a.values[..., 0]) > 1e-4
    c = initial_state(phi, FlowConfig(dt=1e-4, resolution=8, perturbation=1e-3, seed=6))
    assert not np.allclose(a.values, c.values)


def test_sphere_nodes_far_from_the_pole_swap_chart():
    values, charts = place_in_charts(round_sphere(2, 1.0), np.array([[2.0, 0.0], [0.5, 0.5]]), np.array([0, 0]))
    assert_allclose(values[0], [0.5, 0.0])
    assert charts.tolist() == [1, 0]


def test_nodes_outside_the_disk_are_rejected():
    with pytest.raises(DomainError):
        place_in_charts(hyperbolic_disk(2, 1.0), np.array([[1.2, 0.0]]), np.array([0]))


def test_sphere_state_fields_match_the_analytic_tension(torus):
    sphere = round_sphere(2, 1.0)
    phi = custom_map(torus, sphere, lambda x: 0.1 * np.array([np.sin(2 * np.pi * x[0]), np.cos(2 * np.pi * x[1])]))
    state = initial_state(phi, FlowConfig(dt=1e-5, resolution=32))
    fields = state_fields(state)
    assert fields["tension"].shape == (32, 32, 2)
    # Dominant term: the flat Laplacian of the chart map.
    lap = -4 * np.pi ** 2 * state.values
    assert np.max(np.abs(fields["tension"] - lap)) < 0.5
