"""WGAN-GP training loop with a correlation penalty on the generator, plus sampling."""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .._validation import ShapeError, check_square
from .checkpoint import ModelCheckpoint
from .losses import correlation_penalty_planes, gradient_penalty
from .networks import (Discriminator, DiscriminatorConfig, Generator, GeneratorConfig,
                       complex_to_planes, planes_to_complex)

logger = logging.getLogger(__name__)

LOG_FIELDS = ("step", "phase", "critic_iter", "critic_loss", "wasserstein", "gp",
              "generator_loss", "adversarial", "corr_penalty")

DIVERGENCE_LIMIT = 1e6


class TrainingDivergence(RuntimeError):
    """Critic loss blew up; training aborted."""


@dataclass
class TrainConfig:
    critic_iters: int = 5
    lambda_gp: float = 10.0
    nu_corr: float = 10.0
    batch_size: int = 64
    n_steps: int = 20000
    lr: float = 1e-4
    betas: tuple = (0.5, 0.9)
    seed: int = 0
    deterministic: bool = True
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.critic_iters < 1:
            raise ValueError("critic_iters must be >= 1")
        if self.lambda_gp < 0 or self.nu_corr < 0:
            raise ValueError("lambda_gp and nu_corr must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.betas = tuple(float(b) for b in self.betas)

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class TrainingData:
    """Per-class code stacks with their target correlations, ready for batching."""

    codes: list            # per class: (S_c, N, M) complex
    correlations: list     # per class: (M, M) complex
    catalog: dict = None

    @classmethod
    def from_samples(cls, manifest, samples):
        from ..dataset import stack_by_class

        groups = stack_by_class(samples, manifest.n_classes)
        return cls([groups[c] for c in range(manifest.n_classes)],
                   [manifest.correlation(c) for c in range(manifest.n_classes)],
                   manifest.catalog.to_dict())

    @property
    def n_classes(self):
        return len(self.codes)

    @property
    def shape(self):
        return self.codes[0].shape[1:]


def _step_generator(seed, step, stream):
    state = np.random.SeedSequence(seed, spawn_key=(int(step), int(stream))).generate_state(2, dtype=np.uint32)
    return torch.Generator().manual_seed((int(state[0]) | (int(state[1]) << 32)) & ((1 << 63) - 1))


def build_models(gen_cfg, disc_cfg, seed):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        G = Generator(gen_cfg)
        D = Discriminator(disc_cfg)
    return G, D


def _state_arrays(module):
    return {k: v.detach().cpu().numpy().astype(np.float32) for k, v in module.state_dict().items()}


def _load_state(module, arrays):
    module.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in arrays.items()})


def _optimizer_arrays(opt, tag):
    arrays, steps = {}, {}
    for idx, st in opt.state_dict()["state"].items():
        arrays[f"{tag}.{idx}.exp_avg"] = st["exp_avg"].numpy()
        arrays[f"{tag}.{idx}.exp_avg_sq"] = st["exp_avg_sq"].numpy()
        steps[f"{tag}.{idx}"] = float(st["step"])
    return arrays, steps


def _load_optimizer(opt, tag, arrays, steps):
    sd = opt.state_dict()
    state = {}
    for idx in range(len(sd["param_groups"][0]["params"])):
        key = f"{tag}.{idx}"
        if key not in steps:
            continue
        state[idx] = {
            "step": torch.tensor(steps[key]),
            "exp_avg": torch.from_numpy(np.array(arrays[f"{key}.exp_avg"])),
            "exp_avg_sq": torch.from_numpy(np.array(arrays[f"{key}.exp_avg_sq"])),
        }
    sd["state"] = state
    opt.load_state_dict(sd)


class Trainer:
    """Holds models, optimizers and data; ``run`` advances by generator steps."""

    def __init__(self, data, gen_cfg, disc_cfg, train_cfg, log_path=None):
        N, M = data.shape
        if (gen_cfg.N, gen_cfg.M) != (N, M) or (disc_cfg.N, disc_cfg.M) != (N, M):
            raise ShapeError(f"configs expect {(gen_cfg.N, gen_cfg.M)} codes, data has {(N, M)}")
        from ..dataset import build_conditioning_vector

        self.data = data
        self.gen_cfg, self.disc_cfg, self.cfg = gen_cfg, disc_cfg, train_cfg
        self.G, self.D = build_models(gen_cfg, disc_cfg, train_cfg.seed)
        self.opt_g = torch.optim.Adam(self.G.parameters(), lr=train_cfg.lr, betas=train_cfg.betas)
        self.opt_d = torch.optim.Adam(self.D.parameters(), lr=train_cfg.lr, betas=train_cfg.betas)
        self.step = 0
        self.log = []
        self.log_path = log_path

        self.real = [complex_to_planes(X) for X in data.codes]
        R = np.stack([np.asarray(R) for R in data.correlations])
        self.R_real = torch.as_tensor(R.real, dtype=torch.float32)
        self.R_imag = torch.as_tensor(R.imag, dtype=torch.float32)
        self.cond = torch.as_tensor(np.stack([build_conditioning_vector(R) for R in data.correlations]),
                                    dtype=torch.float32)

    # -- batching -------------------------------------------------------------
    def _real_batch(self, labels, gen):
        out = torch.empty((labels.numel(), *self.real[0].shape[1:]), dtype=torch.float32)
        for c in range(self.data.n_classes):
            mask = labels == c
            k = int(mask.sum())
            if k:
                idx = torch.randint(self.real[c].shape[0], (k,), generator=gen)
                out[mask] = self.real[c][idx]
        return out

    def _noise(self, batch, gen):
        return torch.randn((batch, self.gen_cfg.N), generator=gen)

    # -- one generator step -----------------------------------------------------
    def train_step(self):
        cfg, B = self.cfg, self.cfg.batch_size
        gen = _step_generator(cfg.seed, self.step, 0)
        rows = []
        self.G.train()
        self.D.train()
        for k in range(cfg.critic_iters):
            labels = torch.randint(self.data.n_classes, (B,), generator=gen)
            r = self.cond[labels]
            real = self._real_batch(labels, gen)
            with torch.no_grad():
                fake = self.G(self._noise(B, gen), r)
            d_real = self.D(real, r, noise=self.D.input_noise(B, gen))
            d_fake = self.D(fake, r, noise=self.D.input_noise(B, gen))
            gp = gradient_penalty(self.D, real, fake, r, gen) if cfg.lambda_gp > 0 else torch.zeros(())
            wdist = d_real.mean() - d_fake.mean()
            loss_d = -wdist + cfg.lambda_gp * gp
            self.opt_d.zero_grad(set_to_none=True)
            loss_d.backward()
            self.opt_d.step()
            lv = loss_d.item()
            if not math.isfinite(lv) or abs(lv) > DIVERGENCE_LIMIT:
                raise TrainingDivergence(f"critic loss {lv:.4g} at step {self.step}, critic iteration {k}")
            rows.append({"step": self.step, "phase": "critic", "critic_iter": k, "critic_loss": lv,
                         "wasserstein": wdist.item(), "gp": gp.item()})

        labels = torch.randint(self.data.n_classes, (B,), generator=gen)
        r = self.cond[labels]
        fake = self.G(self._noise(B, gen), r)
        adv = -self.D(fake, r, noise=self.D.input_noise(B, gen)).mean()
        pen = correlation_penalty_planes(fake, self.R_real[labels], self.R_imag[labels]).mean()
        loss_g = adv + cfg.nu_corr * pen
        self.opt_g.zero_grad(set_to_none=True)
        loss_g.backward()
        self.opt_g.step()
        rows.append({"step": self.step, "phase": "generator", "generator_loss": loss_g.item(),
                     "adversarial": adv.item(), "corr_penalty": pen.item()})
        self.step += 1
        self._emit(rows)
        return rows

    def _emit(self, rows):
        self.log.extend(rows)
        if self.log_path is None:
            return
        import os

        new = not os.path.exists(self.log_path) or os.path.getsize(self.log_path) == 0
        with open(self.log_path, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=LOG_FIELDS, restval="")
            if new:
                w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    def run(self, n_steps=None, checkpoint_path=None):
        target = self.cfg.n_steps if n_steps is None else n_steps
        with _deterministic(self.cfg.deterministic):
            while self.step < target:
                self.train_step()
                every = self.cfg.checkpoint_every
                if checkpoint_path and every and self.step % every == 0:
                    self.checkpoint().save(checkpoint_path)
        if checkpoint_path:
            self.checkpoint().save(checkpoint_path)
        return self.checkpoint()

    # -- persistence ------------------------------------------------------------
    def checkpoint(self):
        og, sg = _optimizer_arrays(self.opt_g, "gen")
        od, sd = _optimizer_arrays(self.opt_d, "disc")
        return ModelCheckpoint(
            gen_cfg=self.gen_cfg.to_dict(), disc_cfg=self.disc_cfg.to_dict(), train_cfg=self.cfg.to_dict(),
            step=self.step, generator=_state_arrays(self.G), discriminator=_state_arrays(self.D),
            optimizer={**og, **od}, optimizer_steps={**sg, **sd}, catalog=self.data.catalog,
            correlations=[np.asarray(R) for R in self.data.correlations],
        )

    @classmethod
    def resume(cls, data, ckpt, train_cfg=None, log_path=None):
        gen_cfg = GeneratorConfig(**ckpt.gen_cfg)
        disc_cfg = DiscriminatorConfig(**ckpt.disc_cfg)
        train_cfg = train_cfg or TrainConfig(**ckpt.train_cfg)
        self = cls(data, gen_cfg, disc_cfg, train_cfg, log_path=log_path)
        _load_state(self.G, ckpt.generator)
        _load_state(self.D, ckpt.discriminator)
        _load_optimizer(self.opt_g, "gen", ckpt.optimizer, ckpt.optimizer_steps)
        _load_optimizer(self.opt_d, "disc", ckpt.optimizer, ckpt.optimizer_steps)
        self.step = int(ckpt.step)
        return self


class _deterministic:
    def __init__(self, on):
        self.on = on

    def __enter__(self):
        if self.on:
            self._prev = (torch.are_deterministic_algorithms_enabled(), torch.get_num_threads())
            torch.use_deterministic_algorithms(True)
            torch.set_num_threads(1)

    def __exit__(self, *exc):
        if self.on:
            torch.use_deterministic_algorithms(self._prev[0])
            torch.set_num_threads(self._prev[1])


def train(dataset, gen_cfg, disc_cfg, train_cfg, log_path=None, checkpoint_path=None, resume_from=None):
    """Train the conditional WGAN-GP.

    ``dataset`` is a :class:`TrainingData` or a ``(manifest, samples)`` pair.
    Returns ``(checkpoint, log)`` where ``log`` holds one dict per critic and per
    generator update.
    """
    data = dataset if isinstance(dataset, TrainingData) else TrainingData.from_samples(*dataset)
    if resume_from is not None:
        trainer = Trainer.resume(data, resume_from, train_cfg, log_path=log_path)
    else:
        trainer = Trainer(data, gen_cfg, disc_cfg, train_cfg, log_path=log_path)
    ckpt = trainer.run(checkpoint_path=checkpoint_path)
    return ckpt, trainer.log


def load_generator(checkpoint):
    G = Generator(GeneratorConfig(**checkpoint.gen_cfg))
    _load_state(G, checkpoint.generator)
    G.eval()
    return G


def load_discriminator(checkpoint):
    D = Discriminator(DiscriminatorConfig(**checkpoint.disc_cfg))
    _load_state(D, checkpoint.discriminator)
    D.eval()
    return D


def sample_waveforms(checkpoint, R, count, seed=None, generator=None):
    """``count`` code matrices for target correlation ``R`` from one batched pass.

    Returns a complex ``(count, N, M)`` array, unit-modulus in float64.
    """
    from ..dataset import build_conditioning_vector

    R = check_square(R)
    if R.shape[0] != checkpoint.M:
        raise ShapeError(f"R is {R.shape[0]}x{R.shape[0]} but the model generates M={checkpoint.M} waveforms")
    G = generator if generator is not None else load_generator(checkpoint)
    gen = torch.Generator().manual_seed(0 if seed is None else int(seed))
    z = torch.randn((int(count), checkpoint.N), generator=gen)
    r = torch.as_tensor(build_conditioning_vector(R), dtype=torch.float32).expand(int(count), -1)
    with torch.no_grad():
        P = G(z, r, out_dtype=torch.float64)
    return planes_to_complex(P)
