import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimowave._validation import NotPSDError, ShapeError
from mimowave.cao import (CyclicCodeSynthesizer, ca_objective, ca_synthesize, random_unit_modulus,
                          semi_unitary_factor, unit_phase)
from mimowave.covfit import hermitian_sqrt


def random_correlation(rng, m, rank=None):
    k = m if rank is None else rank
    A = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    return A @ A.conj().T


def test_single_waveform_converges_immediately():
    X, tr = ca_synthesize(np.eye(1), 9, seed=0)
    assert tr.converged and tr.iterations <= 2
    assert (X.conj().T @ X)[0, 0].real == pytest.approx(9.0, abs=1e-12)


def test_identity_target_improves_on_initialization():
    seed = 4
    X, tr = ca_synthesize(np.eye(10), 41, seed=seed)
    X0 = random_unit_modulus(np.random.default_rng(seed), (41, 10))
    before = np.linalg.norm(X0.conj().T @ X0 / 41 - np.eye(10))
    after = np.linalg.norm(X.conj().T @ X / 41 - np.eye(10))
    assert after < before
    assert np.all(np.diff(tr.objective_per_iter) <= 1e-10)


def test_seed_determinism(rng):
    R = random_correlation(rng, 4)
    a, _ = ca_synthesize(R, 12, seed=99)
    b, _ = ca_synthesize(R, 12, seed=99)
    assert a.tobytes() == b.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_half_steps_monotone_and_unit_modulus(m, extra, seed):
    r = np.random.default_rng(seed)
    R = random_correlation(r, m)
    X, tr = ca_synthesize(R, m + extra, seed=seed, max_iter=500)
    half = tr.half_steps
    assert np.all(np.diff(half) <= 1e-10 * max(1.0, half[0]))
    assert np.max(np.abs(np.abs(X) - 1)) <= 1e-12


def test_stopping_rule(rng):
    R = random_correlation(rng, 5)
    _, tr = ca_synthesize(R, 20, seed=1, tol=1e-3)
    assert tr.converged
    assert tr.delta_per_iter[-1] < 1e-3
    assert np.all(tr.delta_per_iter[:-1] >= 1e-3)
    assert tr.iterations == len(tr.objective_per_iter)


def test_max_iter_reports_non_convergence(rng):
    _, tr = ca_synthesize(random_correlation(rng, 6), 20, seed=2, tol=0.0, max_iter=7)
    assert not tr.converged and tr.iterations == 7


def test_u_step_beats_random_semi_unitary(rng):
    R = random_correlation(rng, 2)
    L = hermitian_sqrt(R)
    X = random_unit_modulus(rng, (3, 2))
    best = ca_objective(X, semi_unitary_factor(X @ L), L)
    for _ in range(1000):
        Q, _ = np.linalg.qr(rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
        assert ca_objective(X, Q, L) >= best - 1e-12


def test_rank_deficient_target(rng):
    R = random_correlation(rng, 6, rank=2)
    X, tr = ca_synthesize(R, 20, seed=3)
    assert np.isfinite(tr.objective_per_iter).all()
    assert np.max(np.abs(np.abs(X) - 1)) <= 1e-12
    X2, _ = ca_synthesize(np.ones((4, 4)), 8, seed=3)
    assert np.max(np.abs(np.abs(X2) - 1)) <= 1e-12


def test_unit_phase_zero_argument():
    np.testing.assert_array_equal(unit_phase(np.array([0.0, -2.0, 3j])), [1.0, -1.0, 1j])


def test_errors(rng):
    with pytest.raises(ShapeError):
        ca_synthesize(np.eye(5), 4)
    with pytest.raises(NotPSDError):
        ca_synthesize(np.array([[1.0, 2.0], [2.0, 1.0]]), 4)


def test_external_factor_same_objective(rng):
    R = random_correlation(rng, 3)
    W = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    Q, _ = np.linalg.qr(W)
    L = hermitian_sqrt(R) @ Q
    X, tr = ca_synthesize(R, 9, seed=5, L=L)
    assert np.max(np.abs(np.abs(X) - 1)) <= 1e-12
    assert np.all(np.diff(tr.half_steps) <= 1e-10)


def test_estimator_sample_shapes(rng):
    est = CyclicCodeSynthesizer(n_samples=12).fit(random_correlation(rng, 3))
    X = est.sample(4, seed=0)
    assert X.shape == (4, 12, 3)
    assert len(est.traces_) == 4
    np.testing.assert_array_equal(X, est.sample(4, seed=0))
