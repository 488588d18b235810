"""Evaluation: beampattern fidelity, delayed autocorrelation, diversity and timing."""

import csv
import io
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import DomainError, ShapeError, check_code_batch, check_code_matrix, check_square
from .array import AngleGrid, empirical_correlation
from .covfit import fit_objective, hermitian_sqrt, optimal_alpha


def similarity(A, B):
    """``||A^H B||_F``."""
    A = check_code_matrix(A)
    B = check_code_matrix(B)
    if A.shape != B.shape:
        raise ShapeError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A.conj().T @ B))


def _pairwise_similarity(G, D):
    # (g, d) matrix of ||G_i^H D_j||_F without a Python double loop
    gram = np.einsum("inm,jnk->ijmk", G.conj(), D)
    return np.sqrt(np.sum(gram.real ** 2 + gram.imag ** 2, axis=(2, 3)))


def c_in(samples):
    """Mean similarity of each sample to the plain entrywise mean of the set."""
    X = check_code_batch(samples)
    if X.shape[0] < 2:
        raise DomainError("c_in needs at least two samples")
    mean = X.mean(axis=0)
    gram = np.einsum("snm,nk->smk", X.conj(), mean)
    return float(np.mean(np.linalg.norm(gram, axis=(1, 2))))


def _nearest(G, D, chunk=64):
    best = np.empty(G.shape[0])
    for i in range(0, G.shape[0], chunk):
        best[i:i + chunk] = _pairwise_similarity(G[i:i + chunk], D).max(axis=1)
    return best


def c_nn(gan_samples, data_samples):
    """Mean nearest-neighbour similarity of generated samples to the data.

    Normalized by the same statistic for the data against itself, so a model
    that returns the training set scores exactly 1.
    """
    G = check_code_batch(gan_samples)
    D = check_code_batch(data_samples)
    if G.shape[0] == 0 or D.shape[0] == 0:
        raise DomainError("c_nn needs nonempty sample sets")
    if G.shape[1:] != D.shape[1:]:
        raise ShapeError(f"shape mismatch {G.shape[1:]} vs {D.shape[1:]}")
    raw = float(np.mean(_nearest(G, D)))
    norm = float(np.mean(_nearest(D, D)))
    return raw / norm


def delayed_autocorrelation(X, tau):
    """``|Tr(X^H X_tau)|`` with ``X_tau`` delayed by ``tau`` rows, zero-filled."""
    X = check_code_matrix(X)
    N = X.shape[0]
    tau = int(tau)
    if abs(tau) >= N:
        raise DomainError(f"|tau|={abs(tau)} must be below N={N}")
    if tau >= 0:
        val = np.sum(X[tau:].conj() * X[:N - tau])
    else:
        val = np.sum(X[:N + tau].conj() * X[-tau:])
    return float(abs(val))


def autocorrelation_profile(X):
    """``(taus, magnitudes)`` for every delay in ``[-(N-1), N-1]``."""
    N = np.asarray(X).shape[0]
    taus = np.arange(-(N - 1), N)
    return taus, np.array([delayed_autocorrelation(X, t) for t in taus])


def beampattern_rmse(X_or_R, spec, geom, grid=None):
    """Root of the best-scaled mean squared beampattern error.

    A square ``(M, M)`` argument whose size matches the array is taken as a
    correlation matrix; anything else as a code matrix, whose sample correlation
    is used.
    """
    grid = AngleGrid() if grid is None else grid
    A = np.asarray(X_or_R)
    M = geom.num_elements
    if A.ndim == 2 and A.shape == (M, M) and np.allclose(A, A.conj().T) and np.allclose(np.diag(A), 1):
        R = check_square(A, size=M)
    else:
        R = empirical_correlation(A)
        if R.shape[0] != M:
            raise ShapeError(f"code matrix has {R.shape[0]} columns, array has {M} elements")
    L = hermitian_sqrt(R)
    alpha = optimal_alpha(L, spec, geom, grid)
    return float(np.sqrt(fit_objective(alpha, L, spec, geom, grid)))


def mean_correlation(samples):
    """Sample correlation averaged over a stack of code matrices."""
    X = check_code_batch(samples)
    return np.mean([empirical_correlation(x) for x in X], axis=0)


@dataclass
class DiversityReport:
    c_in_gan: float
    c_in_data: float
    c_nn: float
    n_gan: int
    n_data: int
    per_class: list = field(default_factory=list)

    def table(self):
        rows = [("C_in(GAN)", self.c_in_gan), ("C_in(Data)", self.c_in_data), ("C_nn", self.c_nn)]
        width = max(len(r[0]) for r in rows)
        lines = [f"{'Model':<{width}}  Value"]
        lines += [f"{name:<{width}}  {val:.4f}" for name, val in rows]
        return "\n".join(lines)


def diversity_report(gan_by_class, data_by_class):
    """Per-class C_in / C_nn averaged over classes.

    Both arguments map class id to a ``(S, N, M)`` stack; nearest neighbours are
    searched within the same class.
    """
    per = []
    for c in sorted(gan_by_class):
        G = check_code_batch(gan_by_class[c])
        D = check_code_batch(data_by_class[c])
        per.append({"class_id": int(c), "c_in_gan": c_in(G), "c_in_data": c_in(D), "c_nn": c_nn(G, D),
                    "n_gan": int(G.shape[0]), "n_data": int(D.shape[0])})
    if not per:
        raise DomainError("no classes to evaluate")
    return DiversityReport(
        c_in_gan=float(np.mean([p["c_in_gan"] for p in per])),
        c_in_data=float(np.mean([p["c_in_data"] for p in per])),
        c_nn=float(np.mean([p["c_nn"] for p in per])),
        n_gan=sum(p["n_gan"] for p in per), n_data=sum(p["n_data"] for p in per), per_class=per,
    )


@dataclass
class BenchReport:
    single_sample_seconds: dict
    batch100_seconds: float
    repeats: int
    hardware: str = ""

    def table(self):
        return "\n".join([
            f"{'Model':<12} {'Single Sample':>14} {'100 Samples':>12}",
            f"{'MultiCAO':<12} {self.single_sample_seconds['cyclic']:>14.4f} {'-':>12}",
            f"{'GAN (CPU)':<12} {self.single_sample_seconds['generator']:>14.4f} {self.batch100_seconds:>12.4f}",
        ])

    def rows(self):
        return [("cyclic", "single", self.single_sample_seconds["cyclic"]),
                ("generator", "single", self.single_sample_seconds["generator"]),
                ("generator", "batch100", self.batch100_seconds)]

    def to_dict(self):
        return asdict(self)


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def benchmark_generation(checkpoint, correlations=None, repeats=5, warmup=1, seed=0, cao_tol=1e-3,
                         cao_max_iter=10000):
    """Median wall-clock time of cyclic synthesis versus the trained generator.

    The cyclic figure is one run per correlation matrix, averaged over the
    list (default: the checkpoint's class correlations). Run with exclusive use
    of the CPU; nothing here enforces that.
    """
    import torch

    from .cao import ca_synthesize
    from .gan.training import load_generator, sample_waveforms

    corrs = checkpoint.correlations if correlations is None else correlations
    if not corrs:
        raise DomainError("no correlation matrices to benchmark")
    repeats = max(int(repeats), 1)
    N = checkpoint.N
    G = load_generator(checkpoint)
    ss = np.random.SeedSequence(seed)
    L = [hermitian_sqrt(R) for R in corrs]

    def cyclic():
        rngs = [np.random.default_rng(s) for s in ss.spawn(len(corrs))]
        total = sum(_timed(lambda R=R, l=l, g=g: ca_synthesize(R, N, seed=g, tol=cao_tol,
                                                               max_iter=cao_max_iter, L=l))
                    for R, l, g in zip(corrs, L, rngs))
        return total / len(corrs)

    R0 = corrs[0]
    with torch.no_grad():
        for _ in range(warmup):
            sample_waveforms(checkpoint, R0, 1, seed, generator=G)
            sample_waveforms(checkpoint, R0, 100, seed, generator=G)
        single = [_timed(lambda: sample_waveforms(checkpoint, R0, 1, seed, generator=G)) for _ in range(repeats)]
        batch = [_timed(lambda: sample_waveforms(checkpoint, R0, 100, seed, generator=G)) for _ in range(repeats)]
    cyc = [cyclic() for _ in range(repeats)]
    hw = f"{platform.processor() or platform.machine()}; torch threads={torch.get_num_threads()}"
    return BenchReport({"cyclic": float(np.median(cyc)), "generator": float(np.median(single))},
                       float(np.median(batch)), repeats, hw)


def write_csv(rows, header, fh=None):
    """Write ``rows`` under ``header``; returns the text when ``fh`` is None."""
    own = fh is None
    buf = io.StringIO() if own else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue() if own else None
