import numpy as np
import pytest
from numpy.testing import assert_allclose

from geometry.curvature import (
    PlaneSpec,
    christoffel,
    christoffel_batch,
    curvature_bundle,
    curvature_symmetry_defects,
    ricci,
    scalar_curvature,
    sec_upper_bound_check,
    sectional,
    sectional_from_tensor,
    sectional_samples,
)
from geometry.manifolds import deform_metric, flat_torus, hyperbolic_disk, product, round_sphere, scale_metric
from utils.errors import DegeneratePlaneError


@pytest.fixture
def sphere():
    return round_sphere(3, 2.0)


@pytest.mark.parametrize("point", [np.zeros(3), np.array([0.4, -0.3, 1.1]), np.array([2.5, 0.0, 0.0])])
def test_sphere_has_constant_sectional_curvature(sphere, point):
    rng = np.random.default_rng(3)
    for _ in range(5):
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert sectional(sphere, point, PlaneSpec(x, y)) == pytest.approx(0.25, rel=1e-9)


def test_sphere_ricci_and_scalar(sphere):
    point = np.array([0.3, 0.2, -0.1])
    bundle = curvature_bundle(sphere, point)
    assert_allclose(ricci(sphere, point), 2.0 / 4.0 * bundle.metric, rtol=1e-10)
    assert scalar_curvature(sphere, point) == pytest.approx(3 * 2 / 4.0)


def test_hyperbolic_curvature_is_negative():
    disk = hyperbolic_disk(2, 1.0)
    value = sectional(disk, np.array([0.3, 0.1]), PlaneSpec(np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    assert value == pytest.approx(-1.0, rel=1e-10)


def test_scaling_divides_sectional_curvature():
    scaled = scale_metric(round_sphere(2, 1.0), 4.0)
    plane = PlaneSpec(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert sectional(scaled, np.array([0.2, 0.5]), plane) == pytest.approx(0.25, rel=1e-10)


def test_flat_torus_is_flat():
    torus = flat_torus(3, np.array([[1.0, 0.2, 0.0], [0.0, 1.5, 0.3], [0.0, 0.0, 0.7]]))
    bundle = curvature_bundle(torus, np.array([0.1, 0.2, 0.3]))
    assert np.max(np.abs(bundle.riemann)) == 0.0
    assert np.max(np.abs(bundle.christoffel)) == 0.0


def test_product_mixes_zero_and_positive_planes():
    cylinder = product(flat_torus(1), round_sphere(2, 1.0))
    point = np.array([0.0, 0.2, 0.1])
    e = np.eye(3)
    assert sectional(cylinder, point, PlaneSpec(e[0], e[1])) == pytest.approx(0.0, abs=1e-12)
    assert sectional(cylinder, point, PlaneSpec(e[1], e[2])) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("manifold", [round_sphere(3, 1.0), hyperbolic_disk(3, 2.0),
                                      deform_metric(round_sphere(3, 1.0), np.diag([0.2, -0.1, -0.1]))])
def test_symmetry_defects_are_at_roundoff(manifold):
    bundle = curvature_bundle(manifold, np.array([0.2, -0.4, 0.3]))
    defects = curvature_symmetry_defects(bundle.riemann)
    assert set(defects) == {"antisymmetry_first_pair", "antisymmetry_second_pair", "pair_symmetry", "first_bianchi"}
    assert max(defects.values()) < 1e-12


def test_finite_difference_curvature_converges_to_analytic(sphere):
    point = np.array([0.5, 0.2, -0.3])
    exact = curvature_bundle(sphere, point).riemann
    errors = []
    for step in (2e-2, 1e-2, 5e-3):
        fd = sphere.with_derivatives("fd", step, step)
        errors.append(np.max(np.abs(curvature_bundle(fd, point).riemann - exact)))
    assert errors[0] > errors[1] > errors[2]
    assert np.log2(errors[1] / errors[2]) > 1.5


def test_christoffel_is_symmetric_in_lower_indices(sphere):
    gamma = christoffel(sphere, np.array([0.3, 0.1, 0.7]))
    assert_allclose(gamma, gamma.transpose(0, 2, 1), atol=1e-15)


def test_christoffel_batch_matches_pointwise():
    disk = hyperbolic_disk(2, 1.0)
    points = np.array([[[0.1, 0.2], [0.3, -0.1]], [[0.0, 0.0], [-0.4, 0.2]]])
    batch = christoffel_batch(disk, points)
    assert batch.shape == (2, 2, 2, 2, 2)
    for i in range(2):
        for j in range(2):
            assert_allclose(batch[i, j], christoffel(disk, points[i, j]), atol=1e-13)


def test_degenerate_plane_raises(sphere):
    bundle = curvature_bundle(sphere, np.zeros(3))
    x = np.array([1.0, 2.0, 0.0])
    with pytest.raises(DegeneratePlaneError):
        sectional_from_tensor(bundle.riemann, bundle.metric, x, 3.0 * x)
    values = sectional_samples(bundle, np.array([x, x]), np.array([2.0 * x, [0.0, 0.0, 1.0]]))
    assert np.isnan(values[0])
    assert values[1] == pytest.approx(0.25)


def test_sec_upper_bound_check_passes_and_fails(sphere):
    report = sec_upper_bound_check(sphere, 0.25, 20, planes_per_point=10, seed=1, tol=1e-9)
    assert report.passed
    assert report.n_planes == 200
    assert report.max_sectional == pytest.approx(0.25, rel=1e-9)

    tight = sec_upper_bound_check(sphere, 0.2, 5, planes_per_point=10, seed=1)
    assert not tight.passed
    assert tight.worst_point is not None


def test_sec_upper_bound_check_is_reproducible(sphere):
    a = sec_upper_bound_check(sphere, 1.0, 8, planes_per_point=4, seed=5)
    b = sec_upper_bound_check(sphere, 1.0, 8, planes_per_point=4, seed=5)
    assert a == b


def test_sec_upper_bound_check_on_curves_is_vacuous():
    report = sec_upper_bound_check(flat_torus(1), -1.0, 3, planes_per_point=2)
    assert report.passed and report.max_sectional is None


def test_sec_upper_bound_check_validates_arguments(sphere):
    with pytest.raises(ValueError):
        sec_upper_bound_check(sphere, np.inf, 3, planes_per_point=2)
    with pytest.raises(ValueError):
        sec_upper_bound_check(sphere, 1.0, 3, planes_per_point=0)
