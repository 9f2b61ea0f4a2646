import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from geometry.linalg import (
    check_conditioning,
    generalized_eigenvalues,
    operator_norm,
    orthonormal_differential,
    orthonormal_frame,
    symmetrize,
)
from utils.errors import ConditioningError


def _spd(seed, m, spread=1.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, m))
    return a @ a.T + spread * np.eye(m)


def test_check_conditioning():
    assert check_conditioning(np.diag([1.0, 4.0])) == pytest.approx(4.0)
    with pytest.raises(ConditioningError):
        check_conditioning(np.diag([1.0, 1e-10]))
    with pytest.raises(ConditioningError):
        check_conditioning(np.diag([1.0, -1.0]))


def test_generalized_eigenvalues_against_metric():
    g = np.diag([2.0, 4.0])
    values = generalized_eigenvalues(np.diag([6.0, 4.0]), g)
    assert_allclose(values, [1.0, 3.0])
    assert operator_norm(np.diag([-8.0, 2.0]), g) == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 5))
def test_orthonormal_frame_is_orthonormal(seed, m):
    g = _spd(seed, m)
    frame = orthonormal_frame(g)
    assert_allclose(frame.T @ g @ frame, np.eye(m), atol=1e-10)


def test_orthonormal_frame_rejects_degenerate_metric():
    with pytest.raises(ConditioningError):
        orthonormal_frame(np.zeros((2, 2)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_orthonormal_differential_preserves_energy(seed):
    rng = np.random.default_rng(seed)
    g, h = _spd(seed, 3), _spd(seed + 1, 2)
    dphi = rng.normal(size=(2, 3))
    a = orthonormal_differential(dphi, g, h)
    # |dphi|^2 = tr(g^-1 dphi^T h dphi) is the Frobenius norm in orthonormal frames.
    energy = np.trace(np.linalg.solve(g, dphi.T @ h @ dphi))
    assert np.sum(a ** 2) == pytest.approx(energy, rel=1e-10)


def test_symmetrize():
    a = np.array([[1.0, 2.0], [0.0, 3.0]])
    assert_allclose(symmetrize(a), [[1.0, 1.0], [1.0, 3.0]])
