"""Input validation helpers shared by the estimators and free functions."""

import numpy as np


class ShapeError(ValueError):
    """Array dimensions do not agree."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NotPSDError(ValueError):
    """A matrix that must be positive semi-definite has a negative eigenvalue."""


def check_code_matrix(X, unit_tol=None):
    """Return ``X`` as a 2-D complex array; optionally enforce unit modulus."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ShapeError(f"code matrix must be 2-D (N, M), got shape {X.shape}")
    X = X.astype(np.complex128, copy=False)
    if unit_tol is not None:
        dev = np.max(np.abs(np.abs(X) - 1.0)) if X.size else 0.0
        if dev > unit_tol:
            raise DomainError(f"code matrix is not unit-modulus (max deviation {dev:.3g})")
    return X


def check_code_batch(X):
    """Accept one (N, M) matrix or a stack (B, N, M); always return 3-D complex."""
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeError(f"expected (N, M) or (B, N, M), got shape {X.shape}")
    return X.astype(np.complex128, copy=False)


def check_square(R, name="R", size=None):
    R = np.asarray(R).astype(np.complex128, copy=False)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {R.shape}")
    if size is not None and R.shape[0] != size:
        raise ShapeError(f"{name} must be {size}x{size}, got {R.shape[0]}x{R.shape[1]}")
    return R


def check_hermitian(R, atol=1e-8, name="R"):
    R = check_square(R, name)
    err = np.max(np.abs(R - R.conj().T)) if R.size else 0.0
    if err > atol:
        raise DomainError(f"{name} is not Hermitian (max asymmetry {err:.3g})")
    return R


def check_unit_diagonal(R, atol=1e-6, name="R"):
    err = np.max(np.abs(np.diag(R) - 1.0)) if R.size else 0.0
    if err > atol:
        raise DomainError(f"{name} must have unit diagonal (max deviation {err:.3g})")
    return R
