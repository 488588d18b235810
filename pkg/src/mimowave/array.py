"""Transmit-array geometry, steering vectors and beampatterns."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, ShapeError, check_code_matrix, check_square


@dataclass(frozen=True)
class ArrayGeometry:
    """Element positions along one axis, in wavelengths.

    Defaults to a half-wavelength uniform linear array.
    """

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).ravel()
        if pos.size < 1:
            raise DomainError("array needs at least one element")
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise DomainError("element positions must be strictly increasing")
        pos = pos.copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def ula(cls, num_elements, spacing=0.5):
        return cls(spacing * np.arange(int(num_elements), dtype=np.float64))

    @property
    def num_elements(self):
        return int(self.positions.size)

    # dataclass eq would compare arrays elementwise
    def __eq__(self, other):
        return isinstance(other, ArrayGeometry) and np.array_equal(self.positions, other.positions)

    def __hash__(self):
        return hash(self.positions.tobytes())


@dataclass(frozen=True)
class AngleGrid:
    """Strictly increasing evaluation angles in degrees within [-90, 90]."""

    angles_deg: np.ndarray = field(default_factory=lambda: np.arange(-90.0, 91.0, 1.0))

    def __post_init__(self):
        ang = np.asarray(self.angles_deg, dtype=np.float64).ravel()
        if ang.size < 2:
            raise DomainError("angle grid needs at least two angles")
        if np.any(np.diff(ang) <= 0):
            raise DomainError("angle grid must be strictly increasing")
        if ang[0] < -90.0 or ang[-1] > 90.0:
            raise DomainError("angles must lie in [-90, 90] degrees")
        ang = ang.copy()
        ang.setflags(write=False)
        object.__setattr__(self, "angles_deg", ang)

    @classmethod
    def uniform(cls, step_deg=1.0, start=-90.0, stop=90.0):
        n = int(round((stop - start) / step_deg)) + 1
        return cls(np.linspace(start, stop, n))

    def __len__(self):
        return int(self.angles_deg.size)

    def __eq__(self, other):
        return isinstance(other, AngleGrid) and np.array_equal(self.angles_deg, other.angles_deg)

    def __hash__(self):
        return hash(self.angles_deg.tobytes())


def steering_vector(geom, theta_deg):
    """Steering vector ``exp(j 2 pi d_m sin(theta))`` for a broadside angle in degrees."""
    theta = float(theta_deg)
    if not -90.0 <= theta <= 90.0:
        raise DomainError(f"angle {theta} outside [-90, 90] degrees")
    return np.exp(2j * np.pi * geom.positions * np.sin(np.deg2rad(theta)))


def steering_matrix(geom, grid):
    """All steering vectors of ``grid`` as the rows of an (I, M) matrix."""
    s = np.sin(np.deg2rad(grid.angles_deg))
    return np.exp(2j * np.pi * np.outer(s, geom.positions))


def beampattern(R, geom, grid):
    """Beampattern ``a(theta)^H R a(theta)`` on every grid angle (real part)."""
    R = check_square(R, size=None)
    if R.shape[0] != geom.num_elements:
        raise ShapeError(f"R is {R.shape[0]}x{R.shape[0]} but the array has {geom.num_elements} elements")
    A = steering_matrix(geom, grid)
    return np.einsum("im,mk,ik->i", A.conj(), R, A).real


def empirical_correlation(X):
    """Sample cross-correlation ``X^H X / N`` of a unit-modulus code matrix.

    The diagonal is set to exactly one and the result is symmetrized, so it is
    Hermitian with unit diagonal to machine precision.
    """
    X = check_code_matrix(X, unit_tol=1e-6)
    n = X.shape[0]
    R = X.conj().T @ X / n
    R = 0.5 * (R + R.conj().T)
    np.fill_diagonal(R, 1.0)
    return R
