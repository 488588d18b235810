"""Conditional recurrent generator and conditional convolutional critic."""

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .._validation import ShapeError

NORM_EPS = 1e-12


def conditioning_length(M):
    return M * (M - 1)


@dataclass
class GeneratorConfig:
    N: int = 41
    M: int = 10
    embed_hidden: int = 128
    recurrent_hidden: int = 256
    recurrent_layers: int = 2
    leaky_slope: float = 0.2

    def __post_init__(self):
        for name in ("N", "M", "embed_hidden", "recurrent_hidden", "recurrent_layers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"GeneratorConfig.{name} must be positive")

    @property
    def noise_dim(self):
        return self.N

    def to_dict(self):
        return asdict(self)


@dataclass
class DiscriminatorConfig:
    """Critic layout; the defaults reproduce the 41x10 reference layer shapes."""

    N: int = 41
    M: int = 10
    channels: tuple = (128, 256, 512)
    kernels: tuple = ((5, 5), (4, 4), (4, 4))
    strides: tuple = ((2, 1), (2, 2), (2, 2))
    paddings: tuple = ((1, 1), (1, 1), (1, 1))
    leaky_slope: float = 0.2
    input_noise_std: float = 0.1

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.kernels = tuple(tuple(int(v) for v in k) for k in self.kernels)
        self.strides = tuple(tuple(int(v) for v in s) for s in self.strides)
        self.paddings = tuple(tuple(int(v) for v in p) for p in self.paddings)
        if not (len(self.channels) == len(self.kernels) == len(self.strides) == len(self.paddings)):
            raise ValueError("channels, kernels, strides and paddings must have equal length")
        shapes = conv_output_shapes(self)
        if any(h < 1 or w < 1 for h, w, _ in shapes):
            raise ShapeError(f"convolution stack collapses a {self.N}x{self.M} input: {shapes}")

    def to_dict(self):
        d = asdict(self)
        for k in ("channels", "kernels", "strides", "paddings"):
            d[k] = [list(v) if isinstance(v, tuple) else v for v in d[k]]
        return d


def conv_output_shapes(cfg):
    """Predicted ``(height, width, channels)`` after each convolution."""
    h, w = cfg.N, cfg.M
    out = []
    for c, (kh, kw), (sh, sw), (ph, pw) in zip(cfg.channels, cfg.kernels, cfg.strides, cfg.paddings):
        h = (h + 2 * ph - kh) // sh + 1
        w = (w + 2 * pw - kw) // sw + 1
        out.append((h, w, c))
    return out


def to_unit_modulus(raw, out_dtype=None):
    """(..., 2M) real pairs -> (..., M, 2) unit-modulus real/imag planes."""
    if out_dtype is not None:
        raw = raw.to(out_dtype)
    pairs = raw.reshape(*raw.shape[:-1], raw.shape[-1] // 2, 2)
    # floor, not offset: an additive guard would bias every entry by ~eps/|z|
    mag = torch.linalg.vector_norm(pairs, dim=-1).clamp_min(NORM_EPS)
    return pairs / mag.unsqueeze(-1)


class Generator(nn.Module):
    """``G(z, r)``: the conditioning vector is embedded to length N and paired with
    the noise vector as a 2-feature sequence for the LSTM; every time step emits
    one code row as M complex entries.
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        K = conditioning_length(cfg.M)
        self.embed = nn.Sequential(
            nn.Linear(K, cfg.embed_hidden),
            nn.LeakyReLU(cfg.leaky_slope),
            nn.Linear(cfg.embed_hidden, cfg.N),
        )
        self.lstm = nn.LSTM(2, cfg.recurrent_hidden, num_layers=cfg.recurrent_layers, batch_first=True)
        self.head = nn.Linear(cfg.recurrent_hidden, 2 * cfg.M)

    def raw(self, z, r):
        if z.shape[-1] != self.cfg.N or r.shape[-1] != conditioning_length(self.cfg.M):
            raise ShapeError(f"expected z (B, {self.cfg.N}) and r (B, {conditioning_length(self.cfg.M)}), "
                             f"got {tuple(z.shape)} and {tuple(r.shape)}")
        seq = torch.stack([self.embed(r), z], dim=-1)
        h, _ = self.lstm(seq)
        return self.head(h)

    def forward(self, z, r, out_dtype=None):
        """Return ``(B, N, M, 2)`` real/imag planes with unit modulus per entry."""
        return to_unit_modulus(self.raw(z, r), out_dtype)


class Discriminator(nn.Module):
    """Unbounded critic ``D(X, r)`` over ``(B, N, M, 2)`` code planes."""

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        K = conditioning_length(cfg.M)
        self.embed = nn.Linear(K, cfg.N * cfg.M)
        layers = []
        c_in = 3
        for c, k, s, p in zip(cfg.channels, cfg.kernels, cfg.strides, cfg.paddings):
            layers.append(nn.Conv2d(c_in, c, kernel_size=k, stride=s, padding=p))
            layers.append(nn.LeakyReLU(cfg.leaky_slope))
            c_in = c
        self.convs = nn.Sequential(*layers)
        h, w, c = conv_output_shapes(cfg)[-1]
        self.out = nn.Linear(h * w * c, 1)

    def features(self, X, r, noise=None):
        """Stack the conditioning plane with (optionally noised) code planes, NCHW."""
        B = X.shape[0]
        if X.shape[1:] != (self.cfg.N, self.cfg.M, 2):
            raise ShapeError(f"expected X of shape (B, {self.cfg.N}, {self.cfg.M}, 2), got {tuple(X.shape)}")
        planes = X.permute(0, 3, 1, 2)
        if noise is not None:
            planes = planes + noise
        cond = self.embed(r).reshape(B, 1, self.cfg.N, self.cfg.M)
        return torch.cat([cond, planes], dim=1)

    def forward(self, X, r, noise=None, return_shapes=False):
        h = self.features(X, r, noise)
        shapes = []
        for layer in self.convs:
            h = layer(h)
            if isinstance(layer, nn.Conv2d):
                shapes.append((h.shape[2], h.shape[3], h.shape[1]))
        score = self.out(h.flatten(1)).squeeze(-1)
        if return_shapes:
            return score, shapes
        return score

    def input_noise(self, batch, generator=None, dtype=torch.float32):
        return self.cfg.input_noise_std * torch.randn(
            (batch, 2, self.cfg.N, self.cfg.M), generator=generator, dtype=dtype)


def complex_to_planes(X, dtype=torch.float32):
    X = np.asarray(X)
    return torch.as_tensor(np.stack([X.real, X.imag], axis=-1), dtype=dtype)


def planes_to_complex(P):
    P = P.detach().cpu().numpy().astype(np.float64)
    return P[..., 0] + 1j * P[..., 1]


def _as_batch(a, dtype):
    t = torch.as_tensor(np.asarray(a), dtype=dtype)
    return t if t.ndim == 2 else t.unsqueeze(0)


def generator_forward(generator, z, r):
    """Code matrix ``G(z, r)`` as complex ``(N, M)``, or ``(B, N, M)`` for batched inputs.

    Normalization is done in float64 so entries are unit-modulus to ~1e-16.
    """
    dtype = next(generator.parameters()).dtype
    batched = np.ndim(z) == 2
    with torch.no_grad():
        P = generator(_as_batch(z, dtype), _as_batch(r, dtype), out_dtype=torch.float64)
    X = planes_to_complex(P)
    return X if batched else X[0]


def discriminator_forward(discriminator, X, r, noise_on=False, generator=None):
    """Critic score(s) for complex code matrix ``X`` (or a batch) under label ``r``."""
    dtype = next(discriminator.parameters()).dtype
    X = np.asarray(X)
    batched = X.ndim == 3
    P = complex_to_planes(X if batched else X[None], dtype)
    rr = _as_batch(r, dtype).expand(P.shape[0], -1)
    noise = discriminator.input_noise(P.shape[0], generator, dtype) if noise_on else None
    with torch.no_grad():
        s = discriminator(P, rr, noise).numpy().astype(np.float64)
    return s if batched else float(s[0])
