"""Training corpus: per-class correlation fit, cyclic code synthesis, and persistence.

On-disk layout of a dataset directory::

    manifest.json      configuration, catalog, per-class fit and residual statistics
    class_<id>.bin     16-byte header + code matrices of one class

Each ``class_<id>.bin`` starts with the 4-byte magic ``b"MWCM"`` followed by
little-endian uint32 ``version``, ``N`` and ``M``. The body is the class's code
matrices back to back, each row-major with entries stored as interleaved
little-endian float64 ``(re, im)`` pairs.
"""

import json
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, ShapeError, check_hermitian, check_unit_diagonal
from .array import AngleGrid, ArrayGeometry
from .beamspec import BeamClassCatalog
from .cao import ca_synthesize
from .covfit import FitResult, fit_correlation

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
BLOB_MAGIC = b"MWCM"
_HEADER = struct.Struct("<4sIII")
MANIFEST_NAME = "manifest.json"

# spawn-key tags keep the fit and synthesis streams disjoint
_FIT_STREAM = 0
_CA_STREAM = 1


def build_conditioning_vector(R):
    """Strict upper triangle of ``R`` in row-major order, real parts then imaginary parts."""
    R = check_hermitian(R, atol=1e-6)
    check_unit_diagonal(R, atol=1e-6)
    iu = np.triu_indices(R.shape[0], k=1)
    upper = R[iu]
    return np.concatenate([upper.real, upper.imag])


def correlation_from_conditioning(r, M):
    """Inverse of :func:`build_conditioning_vector`."""
    r = np.asarray(r, dtype=np.float64).ravel()
    k = M * (M - 1) // 2
    if r.size != 2 * k:
        raise ShapeError(f"conditioning vector for M={M} has length {2 * k}, got {r.size}")
    R = np.eye(M, dtype=np.complex128)
    iu = np.triu_indices(M, k=1)
    R[iu] = r[:k] + 1j * r[k:]
    R[(iu[1], iu[0])] = r[:k] - 1j * r[k:]
    return R


def class_residuals(X, R):
    """``||N R - X^H X||_F`` for every matrix of a ``(S, N, M)`` stack."""
    X = np.asarray(X)
    N = X.shape[1]
    gram = np.einsum("snm,snk->smk", X.conj(), X)
    return np.linalg.norm(N * R[None] - gram, axis=(1, 2))


def sample_seed(master_seed, class_id, index):
    """Per-sample seed, independent of generation order."""
    return np.random.SeedSequence(master_seed, spawn_key=(_CA_STREAM, int(class_id), int(index)))


def fit_seed(master_seed, class_id):
    return np.random.SeedSequence(master_seed, spawn_key=(_FIT_STREAM, int(class_id)))


@dataclass
class WaveformSample:
    X: np.ndarray
    class_id: int
    r: np.ndarray


@dataclass
class DatasetManifest:
    N: int
    M: int
    samples_per_class: int
    catalog: BeamClassCatalog
    fits: list
    seed: int
    geometry: ArrayGeometry
    grid: AngleGrid
    cao_tol: float = 1e-3
    cao_max_iter: int = 10000
    covfit_options: dict = None
    stats: list = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if len(self.fits) != len(self.catalog):
            raise DomainError(f"{len(self.fits)} fitted matrices for {len(self.catalog)} classes")
        if self.covfit_options is None:
            self.covfit_options = {}
        if self.stats is None:
            self.stats = [{} for _ in self.fits]

    @property
    def n_classes(self):
        return len(self.catalog)

    def correlation(self, class_id):
        return self.fits[class_id].R

    def conditioning(self, class_id):
        return build_conditioning_vector(self.fits[class_id].R)

    def to_dict(self):
        return {
            "format": "mimowave-dataset",
            "format_version": self.format_version,
            "N": self.N,
            "M": self.M,
            "samples_per_class": self.samples_per_class,
            "seed": self.seed,
            "geometry_positions": self.geometry.positions.tolist(),
            "grid_angles_deg": self.grid.angles_deg.tolist(),
            "cao": {"tol": self.cao_tol, "max_iter": self.cao_max_iter},
            "covfit": dict(self.covfit_options),
            "catalog": self.catalog.to_dict(),
            "classes": [
                {"class_id": i, "blob": blob_name(i), "fit": f.to_dict(), "stats": st}
                for i, (f, st) in enumerate(zip(self.fits, self.stats))
            ],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "mimowave-dataset":
            raise ValueError("not a dataset manifest")
        if d["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format version {d['format_version']}")
        classes = sorted(d["classes"], key=lambda c: c["class_id"])
        return cls(
            N=d["N"], M=d["M"], samples_per_class=d["samples_per_class"],
            catalog=BeamClassCatalog.from_dict(d["catalog"]),
            fits=[FitResult.from_dict(c["fit"]) for c in classes],
            seed=d["seed"],
            geometry=ArrayGeometry(d["geometry_positions"]),
            grid=AngleGrid(d["grid_angles_deg"]),
            cao_tol=d["cao"]["tol"], cao_max_iter=d["cao"]["max_iter"],
            covfit_options=d.get("covfit", {}),
            stats=[c.get("stats", {}) for c in classes],
            format_version=d["format_version"],
        )


def blob_name(class_id):
    return f"class_{int(class_id)}.bin"


def _synthesize_class(R, L, N, seed, class_id, count, tol, max_iter):
    X = np.empty((count, N, R.shape[0]), dtype=np.complex128)
    iters = np.empty(count, dtype=np.int64)
    conv = np.empty(count, dtype=bool)
    for j in range(count):
        rng = np.random.default_rng(sample_seed(seed, class_id, j))
        X[j], tr = ca_synthesize(R, N, seed=rng, tol=tol, max_iter=max_iter, L=L)
        iters[j], conv[j] = tr.iterations, tr.converged
    return X, iters, conv


def generate_dataset(catalog, N=41, M=10, samples_per_class=1000, seed=0, geom=None, grid=None,
                     restarts=8, max_iters=2000, fit_tol=1e-8, cao_tol=1e-3, cao_max_iter=10000,
                     n_jobs=None):
    """Fit one ``R`` per catalog class, then draw ``samples_per_class`` cyclic-algorithm codes.

    Returns
    -------
    manifest : DatasetManifest
    samples : list of WaveformSample
        Ordered by class, then sample index.
    """
    if len(catalog) == 0:
        raise DomainError("catalog is empty")
    geom = ArrayGeometry.ula(M) if geom is None else geom
    grid = AngleGrid() if grid is None else grid
    if geom.num_elements != M:
        raise ShapeError(f"geometry has {geom.num_elements} elements but M={M}")

    fits = []
    for spec in catalog:
        res = fit_correlation(spec, geom, grid, restarts=restarts, max_iters=max_iters, tol=fit_tol,
                              seed=fit_seed(seed, spec.class_id))
        if not res.converged:
            logger.info("class %d (%s): fit stopped at gradient norm %.3g (kept)",
                        spec.class_id, spec.name, res.grad_norm)
        fits.append(res)

    jobs = [(f.R, f.L, N, seed, c, samples_per_class, cao_tol, cao_max_iter) for c, f in enumerate(fits)]
    if n_jobs is not None and n_jobs != 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_synthesize_class)(*j) for j in jobs)
    else:
        results = [_synthesize_class(*j) for j in jobs]

    samples, stats = [], []
    for c, (fit, (X, iters, conv)) in enumerate(zip(fits, results)):
        r = build_conditioning_vector(fit.R)
        res = class_residuals(X, fit.R)
        stats.append({
            "residual_mean": float(res.mean()),
            "residual_min": float(res.min()),
            "residual_max": float(res.max()),
            "residuals": res.tolist(),
            "cao_iterations_mean": float(iters.mean()),
            "cao_converged": int(conv.sum()),
        })
        samples.extend(WaveformSample(X[j], c, r) for j in range(samples_per_class))

    manifest = DatasetManifest(
        N=N, M=M, samples_per_class=samples_per_class, catalog=catalog, fits=fits, seed=seed,
        geometry=geom, grid=grid, cao_tol=cao_tol, cao_max_iter=cao_max_iter,
        covfit_options={"restarts": restarts, "max_iters": max_iters, "tol": fit_tol},
        stats=stats,
    )
    return manifest, samples


def stack_by_class(samples, n_classes=None):
    """Group samples into ``{class_id: (S, N, M) array}``."""
    groups = {}
    for s in samples:
        groups.setdefault(s.class_id, []).append(s.X)
    if n_classes is not None:
        missing = set(range(n_classes)) - set(groups)
        if missing:
            raise DomainError(f"no samples for classes {sorted(missing)}")
    return {c: np.stack(v) for c, v in sorted(groups.items())}


def encode_codes(X):
    """Serialize a ``(S, N, M)`` stack (or one ``(N, M)`` matrix) with the blob header."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeError(f"expected (S, N, M), got {X.shape}")
    _, N, M = X.shape
    return _HEADER.pack(BLOB_MAGIC, FORMAT_VERSION, N, M) + np.ascontiguousarray(X, dtype="<c16").tobytes()


def decode_codes(buf):
    if len(buf) < _HEADER.size:
        raise ValueError("truncated code blob")
    magic, version, N, M = _HEADER.unpack_from(buf)
    if magic != BLOB_MAGIC:
        raise ValueError(f"bad blob magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported blob version {version}")
    body = memoryview(buf)[_HEADER.size:]
    per = N * M * 16
    if per == 0 or len(body) % per:
        raise ValueError("blob body is not a whole number of code matrices")
    return np.frombuffer(body, dtype="<c16").reshape(-1, N, M).astype(np.complex128)


def write_codes(path, X):
    with open(path, "wb") as fh:
        fh.write(encode_codes(X))


def read_codes(path):
    with open(path, "rb") as fh:
        return decode_codes(fh.read())


def dumps_manifest(manifest):
    return json.dumps(manifest.to_dict(), indent=1) + "\n"


def save_dataset(directory, manifest, samples):
    os.makedirs(directory, exist_ok=True)
    groups = stack_by_class(samples, manifest.n_classes)
    for c, X in groups.items():
        if X.shape[0] != manifest.samples_per_class:
            raise DomainError(f"class {c} has {X.shape[0]} samples, expected {manifest.samples_per_class}")
        write_codes(os.path.join(directory, blob_name(c)), X)
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write(dumps_manifest(manifest))


def load_dataset(directory):
    with open(os.path.join(directory, MANIFEST_NAME), encoding="utf-8") as fh:
        manifest = DatasetManifest.from_dict(json.load(fh))
    samples = []
    for c in range(manifest.n_classes):
        X = read_codes(os.path.join(directory, blob_name(c)))
        if X.shape[1:] != (manifest.N, manifest.M):
            raise ShapeError(f"class {c} blob holds {X.shape[1:]} matrices, manifest says {(manifest.N, manifest.M)}")
        r = manifest.conditioning(c)
        samples.extend(WaveformSample(X[j], c, r) for j in range(X.shape[0]))
    return manifest, samples
