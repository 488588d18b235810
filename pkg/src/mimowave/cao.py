"""Zero-delay cyclic algorithm for unit-modulus codes with a prescribed correlation.

Minimizes ``||X - sqrt(N) U L^H||_F`` alternately over a semi-unitary ``U``
(polar factor of ``X L``) and a unit-modulus ``X`` (phases of ``sqrt(N) U L^H``).
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import ShapeError, check_square, check_unit_diagonal
from .covfit import hermitian_sqrt


@dataclass
class CaoTrace:
    objective_per_iter: np.ndarray
    delta_per_iter: np.ndarray
    iterations: int
    converged: bool
    # objective after every U-step and X-step, in order, starting at the initial X
    half_steps: np.ndarray = field(default=None, repr=False)


def unit_phase(Z):
    """``exp(j arg Z)`` with ``arg 0 := 0``."""
    mag = np.abs(Z)
    out = np.ones_like(Z, dtype=np.complex128)
    nz = mag > 0
    out[nz] = Z[nz] / mag[nz]
    return out


def random_unit_modulus(rng, shape):
    return np.exp(2j * np.pi * rng.random(shape))


def semi_unitary_factor(Y):
    """Polar factor ``U = P Q^H`` of the thin SVD ``Y = P S Q^H``.

    Maximizes ``Re tr(U^H Y)`` over ``U^H U = I``. Zero singular values are
    completed by whatever orthonormal vectors LAPACK returns, which is
    deterministic for a given input.
    """
    P, _, Qh = np.linalg.svd(Y, full_matrices=False)
    return P @ Qh


def ca_objective(X, U, L):
    n = X.shape[0]
    return float(np.linalg.norm(X - np.sqrt(n) * U @ L.conj().T))


def ca_synthesize(R, N, seed=None, tol=1e-3, max_iter=10000, L=None, X0=None):
    """Synthesize an ``N x M`` unit-modulus code matrix with ``X^H X ~= N R``.

    Parameters
    ----------
    R : (M, M) array_like
        Unit-diagonal PSD target correlation.
    N : int
        Code length, ``N >= M``.
    seed : int, SeedSequence or Generator, optional
        Seeds the uniform random initial phases.
    tol : float
        Stop once ``||X_k - X_{k-1}||_F < tol``.
    max_iter : int
        Iteration cap; reaching it sets ``converged=False``.
    L : (M, M) array_like, optional
        Square-root factor with ``R = L L^H``; computed by :func:`hermitian_sqrt` if omitted.
    X0 : (N, M) array_like, optional
        Explicit initial code matrix (projected to unit modulus).

    Returns
    -------
    X : ndarray
    trace : CaoTrace
    """
    R = check_square(R)
    check_unit_diagonal(R)
    M = R.shape[0]
    N = int(N)
    if N < M:
        raise ShapeError(f"code length N={N} must be at least the number of waveforms M={M}")
    L = hermitian_sqrt(R) if L is None else np.asarray(L, dtype=np.complex128)
    if L.shape != (M, M):
        raise ShapeError(f"L must be {M}x{M}, got {L.shape}")
    Lh = L.conj().T
    sqn = np.sqrt(N)

    if X0 is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        X = random_unit_modulus(rng, (N, M))
    else:
        X = unit_phase(np.asarray(X0, dtype=np.complex128))
        if X.shape != (N, M):
            raise ShapeError(f"X0 must be {N}x{M}, got {X.shape}")

    objectives, deltas, half = [], [], []
    converged = False
    it = 0
    U = semi_unitary_factor(X @ L)
    half.append(ca_objective(X, U, L))
    while it < max_iter:
        it += 1
        X_new = unit_phase(sqn * U @ Lh)
        half.append(ca_objective(X_new, U, L))
        delta = float(np.linalg.norm(X_new - X))
        X = X_new
        U = semi_unitary_factor(X @ L)
        obj = ca_objective(X, U, L)
        half.append(obj)
        objectives.append(obj)
        deltas.append(delta)
        if delta < tol:
            converged = True
            break
    trace = CaoTrace(np.asarray(objectives), np.asarray(deltas), it, converged, np.asarray(half))
    return X, trace


class CyclicCodeSynthesizer(BaseEstimator):
    """Estimator front end: ``fit(R)`` stores the target, ``sample`` draws code matrices.

    ``sample(count, seed)`` runs independent seeded syntheses and stacks them as
    ``(count, N, M)``; per-run traces land in ``traces_``.
    """

    def __init__(self, n_samples=41, tol=1e-3, max_iter=10000):
        self.n_samples = n_samples
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, R, y=None, L=None):
        R = check_square(R)
        check_unit_diagonal(R)
        self.R_ = R
        self.L_ = hermitian_sqrt(R) if L is None else np.asarray(L, dtype=np.complex128)
        self.n_waveforms_ = R.shape[0]
        return self

    def sample(self, count=1, seed=None):
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "R_")
        seeds = np.random.SeedSequence(seed).spawn(int(count))
        out, self.traces_ = [], []
        for s in seeds:
            X, tr = ca_synthesize(self.R_, self.n_samples, seed=np.random.default_rng(s), tol=self.tol,
                                  max_iter=self.max_iter, L=self.L_)
            out.append(X)
            self.traces_.append(tr)
        return np.stack(out)
