import numpy as np
import pytest

from flow.rigidity import Verdict
from geometry.manifolds import deform_metric, flat_torus, round_sphere, scale_metric
from maps.models import equator_inclusion, perturbed_torus_map
from prescription.residuals import (
    StructureSpec,
    conservativity_residual,
    hamilton_corollary_check,
    harmonic_einstein_residual,
    harmonic_einstein_rigidity,
    homothety_fit,
    prescribed_ricci_residual,
)

DEFORMATION = np.diag([0.1, -0.1])


@pytest.fixture
def unit_sphere3():
    return round_sphere(3, 1.0)


@pytest.fixture
def einstein_pair(unit_sphere3):
    """g = 4 h on S^3, so Ric_g = 2 h and the identity is harmonic-Einstein with alpha = 2."""
    return StructureSpec.identity(scale_metric(unit_sphere3, 4.0), unit_sphere3, alpha=2.0)


def test_structure_spec_validation(unit_sphere3):
    with pytest.raises(ValueError):
        StructureSpec.identity(unit_sphere3, unit_sphere3, alpha=0.0)
    spec = StructureSpec.identity(unit_sphere3, unit_sphere3, alpha=1.0, lam=0.5)
    assert spec.g is unit_sphere3 and spec.h is unit_sphere3
    assert spec.lam == 0.5


def test_sphere_pair_is_harmonic_einstein(einstein_pair):
    report = harmonic_einstein_residual(einstein_pair, sample_points=10)
    assert report.sup < 1e-10
    assert report.norm == "g"
    assert len(report.table) == 10
    assert conservativity_residual(einstein_pair, sample_points=10).sup < 1e-10


def test_wrong_constants_leave_a_residual(unit_sphere3):
    spec = StructureSpec.identity(scale_metric(unit_sphere3, 4.0), unit_sphere3, alpha=1.0)
    # Ric_g - h = h, whose norm against g = 4 h is 1/4.
    assert harmonic_einstein_residual(spec, sample_points=5).sup == pytest.approx(0.25, rel=1e-9)


def test_non_harmonic_maps_are_not_conservative():
    torus = flat_torus(2)
    spec = StructureSpec(phi=perturbed_torus_map(torus, torus), alpha=1.0)
    report = conservativity_residual(spec, sample_points=8, seed=2)
    assert report.sup > 0.1
    worst = report.worst(3)
    assert len(worst) == 3
    assert worst[0]["residual"] == report.sup
    assert worst[0]["residual"] >= worst[1]["residual"] >= worst[2]["residual"]
    assert set(report.as_dict()) == {"name", "sup", "norm", "worst"}


def test_prescribed_ricci_on_the_model_pair():
    h = round_sphere(2, 1.0)
    report = prescribed_ricci_residual(scale_metric(h, 4.0), h, 1.0, sample_points=8)
    assert report.sup < 1e-10
    assert report.norm == "h"


def test_prescribed_ricci_detects_deformed_targets():
    g = round_sphere(2, 1.0)
    h = deform_metric(g, DEFORMATION)
    report = prescribed_ricci_residual(g, h, 1.0, sample_points=6)
    # Ric_g - h = -lam E against h = lam (I + E): largest ratio 0.1 / 0.9.
    assert report.sup == pytest.approx(0.1 / 0.9, rel=1e-8)


def test_h_norm_is_invariant_under_rescaling_g():
    g = round_sphere(2, 1.0)
    h = deform_metric(g, DEFORMATION)
    base = prescribed_ricci_residual(g, h, 1.0, sample_points=6)
    scaled = prescribed_ricci_residual(scale_metric(g, 9.0), h, 1.0, sample_points=6)
    assert scaled.sup == pytest.approx(base.sup, rel=1e-10)
    g_norm = prescribed_ricci_residual(scale_metric(g, 9.0), h, 1.0, sample_points=6, norm="g")
    # Against g = 9 lam I the same defect measures 0.1 / 9.
    assert g_norm.sup == pytest.approx(0.1 / 9.0, rel=1e-8)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_g_norm_matches_the_identity_harmonic_einstein_residual(c):
    g = scale_metric(round_sphere(2, 1.0), 2.0)
    h = deform_metric(round_sphere(2, 1.0), DEFORMATION)
    ricci = prescribed_ricci_residual(g, h, c, sample_points=7, seed=3, norm="g")
    structure = harmonic_einstein_residual(StructureSpec.identity(g, h, alpha=c), sample_points=7, seed=3)
    assert ricci.sup == pytest.approx(structure.sup, rel=1e-12)


def test_prescribed_ricci_validates_arguments():
    h = round_sphere(2)
    with pytest.raises(ValueError):
        prescribed_ricci_residual(h, h, 0.0)
    with pytest.raises(ValueError):
        prescribed_ricci_residual(h, h, 1.0, norm="frobenius")


def test_homothety_fit():
    h = round_sphere(2, 1.0)
    mu, residual = homothety_fit(scale_metric(h, 4.0), h, sample_points=5)
    assert mu == pytest.approx(4.0)
    assert residual < 1e-12
    _, deformed = homothety_fit(deform_metric(h, DEFORMATION), h, sample_points=5)
    assert deformed > 0.01


def test_rigidity_on_the_sphere_pair(einstein_pair):
    result = harmonic_einstein_rigidity(einstein_pair, sample_points=8)
    assert result.K == pytest.approx(1.0)
    assert result.applicable
    assert result.passed
    assert result.verdict.verdict == Verdict.HOMOTHETIC_IMMERSION
    assert result.verdict.mu == pytest.approx(0.25)
    assert result.lambda_consistent


def test_positive_lambda_with_a_homothety_is_inconsistent(unit_sphere3, caplog):
    spec = StructureSpec.identity(scale_metric(unit_sphere3, 4.0), unit_sphere3, alpha=2.0, lam=0.5)
    result = harmonic_einstein_rigidity(spec, sample_points=6)
    assert not result.lambda_consistent
    assert not result.applicable
    assert not result.passed
    assert "hypotheses not met" in caplog.text


def test_rigidity_argument_validation(unit_sphere3):
    with pytest.raises(ValueError):
        harmonic_einstein_rigidity(StructureSpec(phi=equator_inclusion(), alpha=1.0))
    with pytest.raises(ValueError):
        harmonic_einstein_rigidity(StructureSpec.identity(unit_sphere3, unit_sphere3, alpha=-1.0))
    with pytest.raises(ValueError):
        harmonic_einstein_rigidity(StructureSpec.identity(unit_sphere3, unit_sphere3, alpha=1.0, lam=-0.1))


def test_hamilton_corollary_on_the_model_pair():
    h = round_sphere(2, 1.0)
    report = hamilton_corollary_check(scale_metric(h, 4.0), h, sample_points=6, planes_per_point=5)
    assert report.hypotheses_hold
    assert report.homothetic
    assert report.mu == pytest.approx(4.0)
    assert report.sec_deviation < 1e-10
    assert report.passed


def test_hamilton_corollary_is_vacuous_when_ricci_fails():
    g = round_sphere(2, 1.0)
    report = hamilton_corollary_check(g, deform_metric(g, DEFORMATION), sample_points=4, planes_per_point=5)
    assert not report.hypotheses_hold
    assert not report.homothetic
    assert report.passed
