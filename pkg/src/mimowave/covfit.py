"""Least-squares fit of a unit-diagonal PSD correlation matrix to a desired beampattern.

The matrix is parameterized as ``R = L L^H`` with every row of ``L`` scaled to unit
norm, so ``R`` is PSD with ones on the diagonal by construction. The beampattern
scale ``alpha`` is eliminated in closed form, leaving an unconstrained problem in
the ``2 M^2`` real coordinates of the unnormalized factor.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator

from ._validation import DomainError, NotPSDError, ShapeError, check_hermitian
from .array import AngleGrid, ArrayGeometry, beampattern, steering_matrix
from .beamspec import BeamSpec, sample_on_grid

logger = logging.getLogger(__name__)

_ROW_EPS = 1e-12


@dataclass
class FitResult:
    R: np.ndarray
    L: np.ndarray
    alpha: float
    objective: float
    iterations: int
    converged: bool
    grad_norm: float = float("nan")
    restart: int = 0
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "R_real": self.R.real.tolist(),
            "R_imag": self.R.imag.tolist(),
            "L_real": self.L.real.tolist(),
            "L_imag": self.L.imag.tolist(),
            "alpha": float(self.alpha),
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "grad_norm": float(self.grad_norm),
            "restart": int(self.restart),
        }

    @classmethod
    def from_dict(cls, d):
        R = np.asarray(d["R_real"]) + 1j * np.asarray(d["R_imag"])
        L = np.asarray(d["L_real"]) + 1j * np.asarray(d["L_imag"])
        return cls(R=R, L=L, alpha=d["alpha"], objective=d["objective"],
                   iterations=d["iterations"], converged=d["converged"],
                   grad_norm=d.get("grad_norm", float("nan")), restart=d.get("restart", 0))


def _desired(spec, grid):
    if isinstance(spec, BeamSpec):
        return sample_on_grid(spec, grid)
    b = np.asarray(spec, dtype=np.float64).ravel()
    if b.size != len(grid):
        raise ShapeError(f"desired pattern has {b.size} samples but the grid has {len(grid)}")
    return b


def _achieved(L, A):
    # a^H L L^H a = ||L^H a||^2; rows of A are steering vectors
    B = A @ L.conj()
    return np.sum(B.real ** 2 + B.imag ** 2, axis=1)


def _alpha_closed_form(b, p):
    bb = float(b @ b)
    if bb <= 0:
        raise DomainError("desired beampattern is identically zero")
    return float(b @ p) / bb


def fit_objective(alpha, L, spec, geom, grid):
    """Mean squared error between ``alpha * b(theta_i)`` and ``a^H L L^H a``."""
    L = np.asarray(L, dtype=np.complex128)
    if L.shape != (geom.num_elements, geom.num_elements):
        raise ShapeError(f"L must be {geom.num_elements}x{geom.num_elements}, got {L.shape}")
    b = _desired(spec, grid)
    p = _achieved(L, steering_matrix(geom, grid))
    return float(np.mean((alpha * b - p) ** 2))


def optimal_alpha(L, spec, geom, grid):
    """Closed-form minimizer over ``alpha`` of :func:`fit_objective`."""
    L = np.asarray(L, dtype=np.complex128)
    if L.shape != (geom.num_elements, geom.num_elements):
        raise ShapeError(f"L must be {geom.num_elements}x{geom.num_elements}, got {L.shape}")
    b = _desired(spec, grid)
    return _alpha_closed_form(b, _achieved(L, steering_matrix(geom, grid)))


def hermitian_sqrt(R):
    """Principal square root ``V diag(sqrt(lambda)) V^H`` of a PSD matrix."""
    R = check_hermitian(R, atol=1e-8)
    R = 0.5 * (R + R.conj().T)
    lam, V = np.linalg.eigh(R)
    if lam.size and lam.min() < -1e-6:
        raise NotPSDError(f"matrix has eigenvalue {lam.min():.3g} < 0")
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.conj().T


class _ReducedProblem:
    """Objective and gradient in the unnormalized factor, alpha profiled out."""

    def __init__(self, b, A):
        self.b = b
        self.A = A
        self.M = A.shape[1]
        self.bb = float(b @ b)
        if self.bb <= 0:
            raise DomainError("desired beampattern is identically zero")

    def unpack(self, w):
        M = self.M
        return w[: M * M].reshape(M, M) + 1j * w[M * M:].reshape(M, M)

    @staticmethod
    def pack(W):
        return np.concatenate([W.real.ravel(), W.imag.ravel()])

    @staticmethod
    def normalize(W):
        norms = np.linalg.norm(W, axis=1)
        return W / np.maximum(norms, 1e-300)[:, None], norms

    def value_and_grad(self, w):
        W = self.unpack(w)
        L, norms = self.normalize(W)
        p = _achieved(L, self.A)
        alpha = float(self.b @ p) / self.bb
        resid = p - alpha * self.b
        f = float(np.mean(resid ** 2))
        # envelope theorem: d/dalpha vanishes at the closed-form alpha
        weights = 2.0 * resid / resid.size
        G = self.A.T @ (weights[:, None] * self.A.conj())
        C = 2.0 * G @ L
        radial = np.sum((L.conj() * C).real, axis=1)
        gW = (C - radial[:, None] * L) / np.maximum(norms, 1e-300)[:, None]
        return f, self.pack(gW)


def _run_restart(problem, W0, max_iters, tol, rng):
    trace = []
    for attempt in range(4):
        w0 = problem.pack(W0)
        trace = [problem.value_and_grad(w0)[0]]

        def cb(intermediate_result):
            trace.append(float(intermediate_result.fun))

        res = minimize(problem.value_and_grad, w0, jac=True, method="L-BFGS-B", callback=cb,
                       options={"maxiter": max_iters, "gtol": tol, "ftol": 1e-15, "maxcor": 20})
        W = problem.unpack(res.x)
        small = np.linalg.norm(W, axis=1) < _ROW_EPS
        if not small.any():
            return W, res, trace
        logger.warning("factor rows %s collapsed (norm < %g); re-randomizing (attempt %d)",
                       np.flatnonzero(small).tolist(), _ROW_EPS, attempt + 1)
        W0 = W.copy()
        W0[small] = _complex_normal(rng, (int(small.sum()), problem.M))
    return W, res, trace


def _complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def fit_correlation(spec, geom, grid=None, restarts=8, max_iters=2000, tol=1e-8, seed=0, n_jobs=None):
    """Best local least-squares fit of ``R = L L^H`` over seeded random restarts.

    Parameters
    ----------
    spec : BeamSpec or array_like
        Desired pattern, as a spec or already sampled on ``grid``.
    geom : ArrayGeometry
    grid : AngleGrid, optional
        Defaults to -90..90 degrees in 1-degree steps.
    restarts, max_iters, tol, seed
        ``tol`` bounds the Euclidean norm of the reduced-objective gradient.
    n_jobs : int, optional
        Restarts are independent and may run in parallel via joblib; the result
        does not depend on scheduling.

    Returns
    -------
    FitResult
        Lowest-objective restart; ties go to the lowest restart index.
    """
    grid = AngleGrid() if grid is None else grid
    b = _desired(spec, grid)
    A = steering_matrix(geom, grid)
    M = geom.num_elements
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    problem = _ReducedProblem(b, A)

    if M == 1:
        L = np.ones((1, 1), dtype=np.complex128)
        p = _achieved(L, A)
        alpha = _alpha_closed_form(b, p)
        obj = float(np.mean((alpha * b - p) ** 2))
        return FitResult(R=L @ L.conj().T, L=L, alpha=alpha, objective=obj, iterations=0,
                         converged=True, grad_norm=0.0, restart=0, trace=[obj])

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(restarts)

    def one(k):
        rng = np.random.default_rng(children[k])
        W0 = _complex_normal(rng, (M, M))
        W, res, trace = _run_restart(problem, W0, max_iters, tol, rng)
        return W, res, trace

    if n_jobs is not None and n_jobs != 1:
        from joblib import Parallel, delayed

        runs = Parallel(n_jobs=n_jobs)(delayed(one)(k) for k in range(restarts))
    else:
        runs = [one(k) for k in range(restarts)]

    best = min(range(restarts), key=lambda k: (runs[k][1].fun, k))
    W, res, trace = runs[best]
    L, _ = problem.normalize(W)
    p = _achieved(L, A)
    alpha = _alpha_closed_form(b, p)
    obj = float(np.mean((alpha * b - p) ** 2))
    gnorm = float(np.linalg.norm(problem.value_and_grad(problem.pack(W))[1]))
    R = L @ L.conj().T
    R = 0.5 * (R + R.conj().T)
    np.fill_diagonal(R, 1.0)
    return FitResult(R=R, L=L, alpha=alpha, objective=obj, iterations=int(res.nit),
                     converged=bool(gnorm <= tol), grad_norm=gnorm, restart=best, trace=trace)


class CorrelationFitter(BaseEstimator):
    """Estimator wrapper around :func:`fit_correlation`.

    ``fit`` takes a :class:`BeamSpec` or a desired pattern sampled on the grid
    given by ``angles_deg``; the fitted matrix is ``R_``.

    >>> fitter = CorrelationFitter(n_elements=4, restarts=2).fit(rect_beam(40))  # doctest: +SKIP
    >>> fitter.R_.shape  # doctest: +SKIP
    (4, 4)
    """

    def __init__(self, n_elements=10, spacing=0.5, angles_deg=None, restarts=8,
                 max_iters=2000, tol=1e-8, seed=0, n_jobs=None):
        self.n_elements = n_elements
        self.spacing = spacing
        self.angles_deg = angles_deg
        self.restarts = restarts
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed
        self.n_jobs = n_jobs

    def _geometry(self):
        geom = ArrayGeometry.ula(self.n_elements, self.spacing)
        grid = AngleGrid() if self.angles_deg is None else AngleGrid(self.angles_deg)
        return geom, grid

    def fit(self, spec, y=None):
        geom, grid = self._geometry()
        res = fit_correlation(spec, geom, grid, restarts=self.restarts, max_iters=self.max_iters,
                              tol=self.tol, seed=self.seed, n_jobs=self.n_jobs)
        self.result_ = res
        self.R_ = res.R
        self.L_ = res.L
        self.alpha_ = res.alpha
        self.objective_ = res.objective
        self.n_iter_ = res.iterations
        return self

    def predict(self, angles_deg=None):
        """Beampattern of the fitted ``R`` on ``angles_deg`` (defaults to the fit grid)."""
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "R_")
        geom, grid = self._geometry()
        if angles_deg is not None:
            grid = AngleGrid(angles_deg)
        return beampattern(self.R_, geom, grid)
