"""Semi-supervised regression GAN with feature contrasting.

Library + experiment CLI for the polynomial coefficient-estimation benchmark:
a from-scratch reverse-mode autodiff core, the SR-GAN / DG-GAN / plain-DNN
training methods, and a seeded sweep harness that reproduces the
labeled-data-efficiency study at desk scale.
"""

__version__ = "0.1.0"

from .dataset import DatasetBundle, Example, PolynomialCoeffs, build_bundle
from .harness import SweepConfig, aggregate, desk_preset, paper_preset, run_sweep
from .losses import LossVariant
from .metrics import PredictionSet, mae, nae_range, nae_relative, relative_error, rmse
from .models import Mlp, MlpSpec, discriminator_spec, generator_spec, init_parameters
from .training import Method, TrainConfig, TrainHistory, Trainer, train

__all__ = [
    "DatasetBundle",
    "Example",
    "PolynomialCoeffs",
    "build_bundle",
    "SweepConfig",
    "aggregate",
    "desk_preset",
    "paper_preset",
    "run_sweep",
    "LossVariant",
    "PredictionSet",
    "mae",
    "nae_range",
    "nae_relative",
    "relative_error",
    "rmse",
    "Mlp",
    "MlpSpec",
    "discriminator_spec",
    "generator_spec",
    "init_parameters",
    "Method",
    "TrainConfig",
    "TrainHistory",
    "Trainer",
    "train",
]
