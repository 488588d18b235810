"""Conditional WGAN-GP for unit-modulus code matrices."""

from .checkpoint import ModelCheckpoint
from .estimator import ConditionalWaveGAN
from .losses import correlation_penalty, gradient_penalty, gradient_penalty_term
from .networks import (Discriminator, DiscriminatorConfig, Generator, GeneratorConfig,
                       conv_output_shapes, discriminator_forward, generator_forward)
from .training import (TrainConfig, Trainer, TrainingData, TrainingDivergence, load_discriminator,
                       load_generator, sample_waveforms, train)

__all__ = [
    "ConditionalWaveGAN", "Discriminator", "DiscriminatorConfig", "Generator", "GeneratorConfig",
    "ModelCheckpoint", "TrainConfig", "Trainer", "TrainingData", "TrainingDivergence",
    "conv_output_shapes", "correlation_penalty", "discriminator_forward", "generator_forward",
    "gradient_penalty", "gradient_penalty_term", "load_discriminator", "load_generator",
    "sample_waveforms", "train",
]
