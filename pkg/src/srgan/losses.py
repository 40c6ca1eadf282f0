"""Objective terms for the three training methods.

The adversarial signal for the regression GAN runs entirely through batch
feature statistics: the discriminator matches labeled and unlabeled mean
features while pushing fake mean features away (feature contrasting), and
the generator chases the unlabeled mean features. Three interchangeable
contrast shapes are provided; the log form keeps a unit-magnitude gradient
per feature as the distance shrinks, where a squared form would vanish.

Every function here only builds graph nodes; nothing is optimized in place.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .models import BoundMlp, Mlp


class LossVariant(enum.Enum):
    """Shape of the fake-contrast term (and the matching generator norm)."""

    LOG_CONTRAST = "log"  # fake: -||log(d_f + 1)||_1, generator: ||d_f||_2^2
    SQRT_CONTRAST = "sqrt"  # fake: -||sqrt(d_f + 1)||_1, generator: ||d_f||_2^2
    LINEAR_CONTRAST = "linear"  # fake: -||d_f||_1, generator: ||d_f||_2

    @classmethod
    def parse(cls, name: str) -> "LossVariant":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown loss variant {name!r}; expected one of "
                f"{[v.value for v in cls]}"
            ) from None


@dataclass(frozen=True)
class LossReport:
    """Per-step scalar loss terms, streamed to the training log."""

    step: int
    labeled_loss: float
    unlabeled_loss: float
    fake_loss: float
    gradient_penalty: float
    generator_loss: float

    CSV_HEADER = "step,labeled,unlabeled,fake,penalty,generator"

    def is_finite(self) -> bool:
        return all(np.isfinite(getattr(self, f.name)) for f in fields(self))

    def csv_row(self) -> str:
        return ",".join(
            [str(self.step)]
            + [
                format(getattr(self, n), ".17g")
                for n in (
                    "labeled_loss",
                    "unlabeled_loss",
                    "fake_loss",
                    "gradient_penalty",
                    "generator_loss",
                )
            ]
        )


def feature_distance(mean_a: ad.Node, mean_b: ad.Node) -> ad.Node:
    """Elementwise |mean_a - mean_b| of two 1×F batch-mean feature vectors."""
    if mean_a.value.shape != mean_b.value.shape or mean_a.value.rows != 1:
        raise ad.ShapeError(
            f"feature means must share a 1×F shape, got {mean_a.value.shape} "
            f"and {mean_b.value.shape}"
        )
    return ad.abs(ad.sub(mean_a, mean_b))


def labeled_loss(predictions: ad.Node, labels) -> ad.Node:
    """Mean squared error of predictions against known labels."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if y.shape[0] != predictions.value.rows or predictions.value.cols != 1:
        raise ad.ShapeError(
            f"predictions {predictions.value.shape} vs labels {y.shape}"
        )
    diff = ad.sub(predictions, predictions.tape.constant(y))
    return ad.mean_rows(ad.square(diff))


def _matching_norm(d_f: ad.Node, variant: LossVariant) -> ad.Node:
    sq = ad.sum(ad.square(d_f))
    if variant is LossVariant.LINEAR_CONTRAST:
        return ad.sqrt(sq)
    if variant in (LossVariant.LOG_CONTRAST, LossVariant.SQRT_CONTRAST):
        return sq
    raise ValueError(f"unknown variant {variant!r}")


def unlabeled_loss(d_f: ad.Node, variant: LossVariant = LossVariant.LOG_CONTRAST) -> ad.Node:
    """Norm of the labeled-vs-unlabeled feature distance: squared L2,
    except unsquared under the linear-contrast set (which pairs a linear
    contrast with a linear match)."""
    return _matching_norm(d_f, variant)


def fake_loss(d_f: ad.Node, variant: LossVariant) -> ad.Node:
    """Negated L1 contrast of the fake-vs-unlabeled feature distance.

    Minimizing this term rewards the discriminator for making fake feature
    statistics distinguishable from real ones.
    """
    if variant is LossVariant.LOG_CONTRAST:
        contrast = ad.log1p_abs(d_f)
    elif variant is LossVariant.SQRT_CONTRAST:
        contrast = ad.sqrt_shift(d_f)
    elif variant is LossVariant.LINEAR_CONTRAST:
        contrast = ad.abs(d_f)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return ad.scale(ad.sum(contrast), -1.0)


def generator_loss(d_f: ad.Node, variant: LossVariant) -> ad.Node:
    """Feature-matching pull of fake mean features toward unlabeled ones:
    squared L2 norm, except the linear-contrast set uses the plain L2 norm."""
    return _matching_norm(d_f, variant)


def interpolate_rows(
    unlabeled_batch: np.ndarray, fake_batch: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Per-row convex combination α·unlabeled + (1−α)·fake, α ~ U(0,1)."""
    unl = np.asarray(unlabeled_batch, dtype=np.float64)
    fake = np.asarray(fake_batch, dtype=np.float64)
    if unl.shape != fake.shape:
        raise ad.ShapeError(f"batch shapes differ: {unl.shape} vs {fake.shape}")
    alpha = rng.uniform(size=(unl.shape[0], 1))
    return alpha * unl + (1.0 - alpha) * fake


def penalty_term(tape: ad.Tape, x_hat: ad.Node, features: ad.Node, lam: float) -> ad.Node:
    """λ · max(‖∇_x̂ (mean feature)‖²₂ − 1, 0) for an already-built feature graph."""
    feature_mean = ad.mean_rows(features)
    grad_norm_sq = ad.grad_norm_sq_wrt_input(tape, feature_mean, x_hat)
    excess = ad.sub(grad_norm_sq, tape.constant([[1.0]]))
    return ad.scale(ad.leaky_relu(excess, 0.0), lam)


def gradient_penalty(
    discriminator,
    unlabeled_batch: np.ndarray,
    fake_batch: np.ndarray,
    lam: float,
    rng: np.random.Generator,
    tape: ad.Tape,
) -> ad.Node:
    """One-sided unit-norm penalty on the feature-mean input gradient at
    random interpolates between unlabeled and fake rows.

    `discriminator` may be an Mlp or an already-bound BoundMlp (so the
    penalty shares parameter leaves with the rest of a step's objective).
    Note the rng draw happens even when lam == 0, keeping stream layout
    independent of λ.
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    interp = interpolate_rows(unlabeled_batch, fake_batch, rng)
    if lam == 0.0:
        return tape.constant([[0.0]])
    bound = discriminator.bind(tape) if isinstance(discriminator, Mlp) else discriminator
    if not isinstance(bound, BoundMlp):
        raise TypeError(f"expected Mlp or BoundMlp, got {type(discriminator).__name__}")
    x_hat = tape.leaf(interp)
    _, features = bound.forward(x_hat)
    return penalty_term(tape, x_hat, features, lam)


def dggan_losses(
    predictions: ad.Node,
    realness_logits: ad.Node,
    labels,
    is_fake_mask,
) -> tuple[ad.Node, ad.Node]:
    """Dual-goal objectives for the width-2 discriminator baseline.

    `labels` is n×1 with NaN marking rows whose label is withheld
    (unlabeled and fake rows); `is_fake_mask` flags generated rows.
    Discriminator: MSE over labeled rows plus real-vs-fake BCE over the
    label-free rows. Generator: BCE driving fake rows toward "real".
    """
    tape = predictions.tape
    n = predictions.value.rows
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    fake = np.asarray(is_fake_mask, dtype=bool).reshape(-1, 1)
    if y.shape[0] != n or fake.shape[0] != n:
        raise ad.ShapeError(
            f"expected {n} labels and mask rows, got {y.shape[0]} and {fake.shape[0]}"
        )
    if realness_logits.value.shape != (n, 1):
        raise ad.ShapeError(f"realness logits must be {n}×1, got {realness_logits.value.shape}")
    has_label = np.isfinite(y)
    if (has_label & fake).any():
        raise ValueError("a row cannot be both labeled and fake")

    if has_label.any():
        diff = ad.sub(predictions, tape.constant(np.where(has_label, y, 0.0)))
        masked_sq = ad.mul_const(ad.square(diff), has_label.astype(np.float64))
        mse = ad.scale(ad.sum(masked_sq), 1.0 / float(has_label.sum()))
    else:
        mse = tape.constant([[0.0]])

    adversarial_rows = ~has_label
    if adversarial_rows.any():
        targets = np.where(fake, 0.0, 1.0)
        bce = ad.bce_with_logits(realness_logits, targets, adversarial_rows.astype(np.float64))
        d_loss = ad.add(mse, bce)
    else:
        d_loss = mse

    if fake.any():
        g_loss = ad.bce_with_logits(
            realness_logits, np.ones((n, 1)), fake.astype(np.float64)
        )
    else:
        g_loss = tape.constant([[0.0]])
    return d_loss, g_loss
