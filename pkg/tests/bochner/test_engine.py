import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bochner.engine import (
    bochner_report,
    q1_contraction,
    q1_frame_form,
    q1_frame_value,
    q1_pair_term,
    q1_sum_form,
    q1_summands,
    q_split,
    q_term,
)
from geometry.manifolds import deform_metric, flat_torus, round_sphere, scale_metric
from maps.models import chart_transition_map, constant_map, equator_inclusion, identity_map, linear_torus_map


def _constant_curvature_tensor(n, kappa):
    eye = np.eye(n)
    return kappa * (np.einsum("ac,bd->abcd", eye, eye) - np.einsum("ad,bc->abcd", eye, eye))


@pytest.fixture
def deformed_identity():
    sphere = round_sphere(3, 1.0)
    return identity_map(sphere, deform_metric(sphere, np.diag([0.3, -0.1, -0.2])))


@pytest.mark.parametrize("phi_factory", [
    lambda: identity_map(round_sphere(3, 1.0)),
    lambda: identity_map(round_sphere(2, 1.0), scale_metric(round_sphere(2, 1.0), 3.0)),
    lambda: chart_transition_map(round_sphere(2, 1.0)),
    lambda: equator_inclusion(1.0, 2.0),
    lambda: linear_torus_map(flat_torus(2), flat_torus(2), [[1.0, 2.0], [0.0, 1.0]]),
])
def test_q_vanishes_for_model_maps(phi_factory):
    phi = phi_factory()
    x = 0.6 * np.ones(phi.source.dim)
    assert q_term(phi, x) == pytest.approx(0.0, abs=1e-10)


def test_sphere_identity_split_at_its_curvature():
    phi = identity_map(round_sphere(3, 1.0))
    q0, q1 = q_split(phi, np.array([0.1, 0.2, 0.3]), K=1.0)
    assert q0 == pytest.approx(0.0, abs=1e-10)
    assert q1 == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("K", [0.0, 0.5, 2.0])
def test_split_sums_to_q(deformed_identity, K):
    x = np.array([0.2, -0.3, 0.1])
    q0, q1 = q_split(deformed_identity, x, K)
    assert q0 + q1 == pytest.approx(q_term(deformed_identity, x), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("K", [0.0, 0.7, 1.5])
def test_frame_form_matches_contraction(deformed_identity, K):
    x = np.array([0.4, 0.1, -0.2])
    direct = q_split(deformed_identity, x, K)[1]
    framed, data = q1_frame_form(deformed_identity, x, K)
    assert framed == pytest.approx(direct, rel=1e-10, abs=1e-10)
    assert q1_sum_form(data.c, data.kappa, K) == pytest.approx(direct, rel=1e-10, abs=1e-10)


def test_frame_form_is_frame_independent(deformed_identity):
    x = np.array([0.4, 0.1, -0.2])
    base_value, data = q1_frame_form(deformed_identity, x, 0.8)
    angle = 0.7
    rotation = np.array([[np.cos(angle), -np.sin(angle), 0.0], [np.sin(angle), np.cos(angle), 0.0], [0, 0, 1.0]])
    rotated_value, _ = q1_frame_form(deformed_identity, x, 0.8, frame=data.frame @ rotation)
    assert rotated_value == pytest.approx(base_value, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(2, 4), n=st.integers(2, 4),
       kappa=st.floats(-2.0, 2.0), K=st.floats(0.0, 3.0))
def test_three_forms_agree_for_constant_curvature_targets(seed, m, n, kappa, K):
    rng = np.random.default_rng(seed)
    dphi = rng.normal(size=(n, m))
    R = _constant_curvature_tensor(n, kappa)
    direct = q1_contraction(dphi, R, K)
    c = dphi.T @ dphi
    kappa_matrix = kappa * (1.0 - np.eye(m))
    assert q1_frame_value(c, kappa_matrix, K) == pytest.approx(direct, rel=1e-9, abs=1e-9)
    assert q1_sum_form(c, kappa_matrix, K) == pytest.approx(direct, rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(2, 5), K=st.floats(0.0, 2.0), gap=st.floats(0.0, 1.0))
def test_summands_are_non_negative_below_the_bound(seed, m, K, gap):
    rng = np.random.default_rng(seed)
    images = rng.normal(size=(m + 1, m))
    c = images.T @ images
    kappa = (K - gap) * (1.0 - np.eye(m))
    summands = q1_summands(c, kappa, K)
    assert np.all(summands >= -1e-9 * (1.0 + np.max(np.abs(c)) ** 2))
    assert np.all(np.tril(summands) == 0.0)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-10.0, 10.0), b=st.floats(-10.0, 10.0), c=st.floats(-10.0, 10.0),
       kappa=st.floats(-3.0, 3.0), K=st.floats(-3.0, 3.0), m=st.integers(2, 6))
def test_pair_term_matches_the_expanded_quadratic(a, b, c, kappa, K, m):
    expanded = K * (a * a + b * b) - 2.0 * kappa * a * b + 2.0 * ((m - 1) * K + kappa) * c * c
    assert q1_pair_term(a, b, c, kappa, K, m) == pytest.approx(expanded, rel=1e-9, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-10.0, 10.0), b=st.floats(-10.0, 10.0), c=st.floats(-10.0, 10.0),
       kappa=st.floats(-3.0, 3.0), K=st.floats(-3.0, 3.0))
def test_pair_term_is_the_whole_frame_value_in_two_dimensions(a, b, c, kappa, K):
    forms = np.array([[a, c], [c, b]])
    kappas = kappa * (1.0 - np.eye(2))
    assert q1_frame_value(forms, kappas, K) == pytest.approx(q1_pair_term(a, b, c, kappa, K, 2),
                                                             rel=1e-9, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(2, 5), K=st.floats(-2.0, 2.0))
def test_summands_are_pair_terms_of_the_entries(seed, m, K):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(m, m))
    c = c + c.T
    kappa = rng.normal(size=(m, m))
    kappa = kappa + kappa.T
    summands = q1_summands(c, kappa, K)
    for i, j in zip(*np.triu_indices(m, k=1)):
        expected = q1_pair_term(c[i, i], c[j, j], c[i, j], kappa[i, j], K, m)
        assert summands[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_report_without_laplacian_has_no_residual():
    phi = identity_map(round_sphere(2, 1.0))
    report = bochner_report(phi, np.array([0.1, 0.2]), K=1.0)
    assert report.residual is None
    assert report.energy_density == pytest.approx(2.0)
    assert report.as_dict()["K"] == 1.0


def test_report_residual_uses_the_supplied_laplacian():
    phi = identity_map(round_sphere(2, 1.0))
    report = bochner_report(phi, np.zeros(2), laplacian_energy=0.4)
    assert report.residual == pytest.approx(0.2, abs=1e-10)


def test_constant_map_terms_vanish():
    phi = constant_map(round_sphere(2), round_sphere(2), [0.3, 0.1])
    q0, q1 = q_split(phi, np.array([0.2, 0.2]), 1.0)
    assert q0 == 0.0 and q1 == 0.0
