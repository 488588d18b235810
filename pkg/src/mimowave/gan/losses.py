"""Correlation penalty and WGAN gradient penalty on real/imag code planes."""

import numpy as np
import torch

from .._validation import check_code_batch, check_square


def gram_planes(P):
    """``X^H X`` for ``(B, N, M, 2)`` planes, returned as (real, imag) ``(B, M, M)`` tensors."""
    Xr, Xi = P[..., 0], P[..., 1]
    Xr_t, Xi_t = Xr.transpose(1, 2), Xi.transpose(1, 2)
    return Xr_t @ Xr + Xi_t @ Xi, Xr_t @ Xi - Xi_t @ Xr


def correlation_penalty_planes(P, R_real, R_imag):
    """Per-sample ``||N R - X^H X||_F``; ``R_real``/``R_imag`` are ``(B, M, M)`` or ``(M, M)``."""
    N = P.shape[1]
    Gr, Gi = gram_planes(P)
    dr = N * R_real - Gr
    di = N * R_imag - Gi
    return torch.sqrt(torch.sum(dr ** 2 + di ** 2, dim=(-2, -1)))


def correlation_penalty(X, R):
    """``||N R - X^H X||_F`` for one complex code matrix; mean over a ``(B, N, M)`` batch."""
    X = check_code_batch(X)
    R = check_square(R, size=X.shape[2])
    N = X.shape[1]
    gram = np.einsum("bnm,bnk->bmk", X.conj(), X)
    return float(np.mean(np.linalg.norm(N * R[None] - gram, axis=(1, 2))))


def interpolate(real, fake, generator=None):
    """``t * real + (1 - t) * fake`` with one uniform ``t`` per pair."""
    t = torch.rand((real.shape[0],) + (1,) * (real.ndim - 1), generator=generator, dtype=real.dtype)
    return t * real + (1.0 - t) * fake


def critic_input_gradients(discriminator, S, r, create_graph=False):
    """Gradient of the noise-free critic with respect to its code-plane input."""
    S = S.detach().requires_grad_(True)
    score = discriminator(S, r, noise=None)
    (grad,) = torch.autograd.grad(score.sum(), S, create_graph=create_graph)
    return grad


def gradient_penalty(discriminator, real, fake, r, generator=None, create_graph=True):
    """Mean ``(||grad_s D(s, r)||_2 - 1)^2`` over interpolates of same-class pairs.

    The norm runs over all ``2 N M`` real coordinates of each interpolate.
    """
    S = interpolate(real, fake, generator)
    grad = critic_input_gradients(discriminator, S, r, create_graph=create_graph)
    norms = grad.flatten(1).norm(dim=1)
    return torch.mean((norms - 1.0) ** 2)


def gradient_penalty_term(discriminator, X_real, X_fake, r, t_seed=None):
    """Numpy-facing gradient penalty for complex ``(B, N, M)`` real/fake batches."""
    from .networks import complex_to_planes

    dtype = next(discriminator.parameters()).dtype
    real = complex_to_planes(check_code_batch(X_real), dtype)
    fake = complex_to_planes(check_code_batch(X_fake), dtype)
    rr = torch.as_tensor(np.asarray(r), dtype=dtype)
    if rr.ndim == 1:
        rr = rr.unsqueeze(0).expand(real.shape[0], -1)
    gen = torch.Generator().manual_seed(int(t_seed)) if t_seed is not None else None
    return float(gradient_penalty(discriminator, real, fake, rr, gen, create_graph=False))
