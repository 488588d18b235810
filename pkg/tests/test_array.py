import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimowave._validation import DomainError, ShapeError
from mimowave.array import AngleGrid, ArrayGeometry, beampattern, empirical_correlation, steering_vector

from conftest import random_codes


def test_ula_defaults():
    g = ArrayGeometry.ula(4)
    np.testing.assert_array_equal(g.positions, [0, 0.5, 1.0, 1.5])
    assert g.num_elements == 4


def test_geometry_rejects_unsorted_positions():
    with pytest.raises(DomainError):
        ArrayGeometry([0.0, 1.0, 0.5])


def test_default_grid_is_one_degree():
    grid = AngleGrid()
    assert len(grid) == 181
    assert grid.angles_deg[0] == -90 and grid.angles_deg[-1] == 90


@pytest.mark.parametrize("angles", [[0.0], [10.0, 5.0], [-91.0, 0.0]])
def test_grid_validation(angles):
    with pytest.raises(DomainError):
        AngleGrid(angles)


def test_steering_broadside_is_ones():
    np.testing.assert_allclose(steering_vector(ArrayGeometry.ula(4), 0.0), np.ones(4))


def test_steering_thirty_degrees():
    np.testing.assert_allclose(steering_vector(ArrayGeometry.ula(2), 30.0), [1, 1j], atol=1e-15)


def test_steering_out_of_range():
    with pytest.raises(DomainError):
        steering_vector(ArrayGeometry.ula(3), 95.0)


@given(st.floats(-90, 90), st.integers(1, 12))
def test_steering_conjugate_symmetry_and_unit_modulus(theta, m):
    g = ArrayGeometry.ula(m)
    a = steering_vector(g, theta)
    np.testing.assert_allclose(steering_vector(g, -theta), a.conj(), atol=1e-12)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)


@pytest.mark.parametrize("m", [1, 3, 10])
def test_identity_beampattern_is_omnidirectional(m):
    b = beampattern(np.eye(m), ArrayGeometry.ula(m), AngleGrid())
    np.testing.assert_allclose(b, m, atol=1e-12)
    assert np.isclose(np.mean(b / m), 1.0, atol=1e-15)


def test_identity_beampattern_nonuniform_geometry():
    g = ArrayGeometry([0.0, 0.3, 1.1, 2.0])
    np.testing.assert_allclose(beampattern(np.eye(4), g, AngleGrid.uniform(0.5)), 4, atol=1e-12)


def test_coherent_broadside_sum():
    b = beampattern(np.ones((2, 2)), ArrayGeometry.ula(2), AngleGrid([-10.0, 0.0, 10.0]))
    assert b[1] == pytest.approx(4.0)


@settings(max_examples=30)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_psd_beampattern_nonnegative(m, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((m, m)) + 1j * r.standard_normal((m, m))
    assert beampattern(A @ A.conj().T, ArrayGeometry.ula(m), AngleGrid()).min() >= -1e-10


def test_beampattern_shape_mismatch():
    with pytest.raises(ShapeError):
        beampattern(np.eye(3), ArrayGeometry.ula(4), AngleGrid())


def test_empirical_correlation_unit_diagonal(rng):
    R = empirical_correlation(random_codes(rng, 41, 10))
    np.testing.assert_array_equal(np.diag(R), np.ones(10))
    np.testing.assert_array_equal(R, R.conj().T)
    assert np.abs(R).max() <= 1.0 + 1e-12


def test_empirical_correlation_single_waveform(rng):
    np.testing.assert_array_equal(empirical_correlation(random_codes(rng, 7, 1)), [[1.0]])


def test_empirical_correlation_dft_columns_is_identity():
    n = 8
    F = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    np.testing.assert_allclose(empirical_correlation(F), np.eye(n), atol=1e-12)


def test_empirical_correlation_rejects_non_unit_modulus():
    with pytest.raises(DomainError):
        empirical_correlation(2 * np.ones((4, 2)))
