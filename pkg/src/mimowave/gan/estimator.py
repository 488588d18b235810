"""scikit-learn style front end for the conditional generator."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import ShapeError, check_code_batch
from .networks import DiscriminatorConfig, GeneratorConfig
from .training import TrainConfig, Trainer, TrainingData, load_generator, sample_waveforms


class ConditionalWaveGAN(BaseEstimator):
    """Conditional WGAN-GP over unit-modulus code matrices.

    ``fit(X, y, correlations)`` takes a ``(S, N, M)`` complex stack, integer class
    labels ``0..K-1`` and the ``K`` target correlation matrices. ``sample(R, count)``
    draws new codes for any correlation matrix of matching size.
    """

    def __init__(self, embed_hidden=128, recurrent_hidden=256, recurrent_layers=2,
                 disc_channels=(128, 256, 512), disc_paddings=((1, 1), (1, 1), (1, 1)),
                 leaky_slope=0.2, input_noise_std=0.1, critic_iters=5, lambda_gp=10.0,
                 nu_corr=10.0, batch_size=64, n_steps=20000, lr=1e-4, betas=(0.5, 0.9),
                 seed=0, deterministic=True):
        self.embed_hidden = embed_hidden
        self.recurrent_hidden = recurrent_hidden
        self.recurrent_layers = recurrent_layers
        self.disc_channels = disc_channels
        self.disc_paddings = disc_paddings
        self.leaky_slope = leaky_slope
        self.input_noise_std = input_noise_std
        self.critic_iters = critic_iters
        self.lambda_gp = lambda_gp
        self.nu_corr = nu_corr
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.lr = lr
        self.betas = betas
        self.seed = seed
        self.deterministic = deterministic

    def _configs(self, N, M):
        gen = GeneratorConfig(N=N, M=M, embed_hidden=self.embed_hidden,
                              recurrent_hidden=self.recurrent_hidden,
                              recurrent_layers=self.recurrent_layers, leaky_slope=self.leaky_slope)
        disc = DiscriminatorConfig(N=N, M=M, channels=self.disc_channels, paddings=self.disc_paddings,
                                   leaky_slope=self.leaky_slope, input_noise_std=self.input_noise_std)
        train = TrainConfig(critic_iters=self.critic_iters, lambda_gp=self.lambda_gp, nu_corr=self.nu_corr,
                            batch_size=self.batch_size, n_steps=self.n_steps, lr=self.lr, betas=self.betas,
                            seed=self.seed, deterministic=self.deterministic)
        return gen, disc, train

    def fit(self, X, y, correlations, log_path=None):
        X = check_code_batch(X)
        y = np.asarray(y, dtype=np.int64).ravel()
        if y.size != X.shape[0]:
            raise ShapeError(f"{X.shape[0]} code matrices but {y.size} labels")
        K = len(correlations)
        if y.min() < 0 or y.max() >= K:
            raise ShapeError(f"labels must lie in 0..{K - 1}")
        codes = [X[y == c] for c in range(K)]
        if any(c.shape[0] == 0 for c in codes):
            raise ShapeError("every class needs at least one sample")
        data = TrainingData(codes, [np.asarray(R, dtype=np.complex128) for R in correlations])
        return self._fit_data(data, log_path)

    def fit_dataset(self, manifest, samples, log_path=None):
        return self._fit_data(TrainingData.from_samples(manifest, samples), log_path)

    def _fit_data(self, data, log_path):
        N, M = data.shape
        trainer = Trainer(data, *self._configs(N, M), log_path=log_path)
        self.checkpoint_ = trainer.run()
        self.log_ = trainer.log
        self.generator_ = load_generator(self.checkpoint_)
        self.n_samples_, self.n_waveforms_ = N, M
        return self

    def sample(self, R, count=1, seed=None):
        check_is_fitted(self, "checkpoint_")
        return sample_waveforms(self.checkpoint_, R, count, seed, generator=self.generator_)

    def score(self, X, y=None, R=None):
        """Negative mean correlation penalty of ``X`` against ``R`` (higher is better)."""
        from .losses import correlation_penalty

        return -correlation_penalty(X, R)
