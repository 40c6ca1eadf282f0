"""Deterministic training loops for the three methods.

One step = one discriminator update followed by one generator update (for
the methods that have a generator), on minibatches drawn once per step.
Everything stochastic flows from a single per-trial generator seeded by the
config, so a rerun with the same (config, bundle) is bit-identical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import losses as L
from .dataset import DatasetBundle, Example, label_vector, observation_matrix
from .losses import LossReport, LossVariant
from .metrics import PredictionSet, mae
from .models import (
    Mlp,
    discriminator_spec,
    dual_head,
    generator_spec,
)


class Method(enum.Enum):
    DNN = "dnn"
    SRGAN = "srgan"
    DGGAN = "dggan"

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown method {name!r}; expected one of {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class TrainConfig:
    method: Method = Method.SRGAN
    variant: LossVariant = LossVariant.LOG_CONTRAST
    steps: int = 50_000
    batch_labeled: int = 32
    batch_unlabeled: int = 32
    batch_fake: int = 32
    learning_rate_d: float = 1e-3
    learning_rate_g: float = 1e-3
    penalty_weight: float = 10.0
    noise_dim: int = 10
    seed: int = 0
    eval_interval: int = 1_000

    def __post_init__(self):
        for name in ("steps", "batch_labeled", "batch_unlabeled", "batch_fake", "noise_dim", "eval_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("learning_rate_d", "learning_rate_g"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.penalty_weight < 0.0:
            raise ValueError(f"penalty_weight must be >= 0, got {self.penalty_weight}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if (
            self.method is Method.SRGAN
            and self.penalty_weight > 0.0
            and self.batch_unlabeled != self.batch_fake
        ):
            raise ValueError(
                "gradient penalty interpolates unlabeled against fake rows, "
                f"so batch_unlabeled ({self.batch_unlabeled}) must equal "
                f"batch_fake ({self.batch_fake})"
            )

    def with_(self, **kwargs) -> "TrainConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    report: LossReport
    test_mae: float


@dataclass
class TrainHistory:
    entries: list[HistoryEntry] = field(default_factory=list)

    CSV_HEADER = LossReport.CSV_HEADER + ",test_mae"

    def append(self, entry: HistoryEntry) -> None:
        if self.entries and entry.step <= self.entries[-1].step:
            raise ValueError(
                f"history steps must increase: {entry.step} after {self.entries[-1].step}"
            )
        self.entries.append(entry)

    @property
    def final_test_mae(self) -> float:
        if not self.entries:
            raise ValueError("empty history")
        return self.entries[-1].test_mae

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for e in self.entries:
            lines.append(e.report.csv_row() + "," + format(e.test_mae, ".17g"))
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "TrainHistory":
        lines = text.strip().splitlines()
        if not lines or lines[0] != cls.CSV_HEADER:
            raise ValueError("not a training history file")
        history = cls()
        for line in lines[1:]:
            parts = line.split(",")
            step = int(parts[0])
            vals = [float(v) for v in parts[1:]]
            history.append(
                HistoryEntry(step, LossReport(step, *vals[:5]), vals[5])
            )
        return history

    @classmethod
    def load_csv(cls, path) -> "TrainHistory":
        with open(path) as f:
            return cls.from_csv(f.read())


class TrainingDiverged(RuntimeError):
    """Raised when a loss term goes non-finite; carries the offending report."""

    def __init__(self, report: LossReport):
        super().__init__(f"non-finite loss at step {report.step}: {report}")
        self.report = report


class Adam:
    """Adam with bias correction: θ ← θ − lr · m̂ / (√v̂ + ε)."""

    def __init__(self, shapes: Sequence[tuple], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def apply(self, params: list[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ValueError("parameter/gradient count mismatch")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class Trainer:
    """Owns the networks, optimizer state, and the per-trial random stream."""

    def __init__(self, config: TrainConfig, bundle: DatasetBundle):
        self.config = config
        self.bundle = bundle
        if len(bundle.labeled) < 1:
            raise ValueError("training requires at least one labeled example")
        if config.method is not Method.DNN and len(bundle.unlabeled) < 1:
            raise ValueError(f"{config.method.value} requires unlabeled examples")

        self.x_labeled, self.y_labeled = bundle.labeled_arrays()
        self.x_unlabeled = bundle.unlabeled_matrix()

        # one stream drives everything: network init, then per-step draws
        # (kept distinct from the dataset stream, which uses the bare seed)
        self.rng = np.random.default_rng([config.seed, 0x7261696E])
        head = 2 if config.method is Method.DGGAN else 1
        self.d = Mlp.initialized(discriminator_spec(output_dim=head), self.rng)
        self.g: Optional[Mlp] = (
            None
            if config.method is Method.DNN
            else Mlp.initialized(generator_spec(noise_dim=config.noise_dim), self.rng)
        )
        self.adam_d = Adam([p.shape for p in self.d.params], config.learning_rate_d)
        self.adam_g = (
            Adam([p.shape for p in self.g.params], config.learning_rate_g) if self.g else None
        )
        self.counters = {"labeled_batches": 0, "unlabeled_batches": 0, "noise_batches": 0}

    # --- minibatch draws (with replacement; pools may be smaller than a batch)

    def _labeled_minibatch(self) -> tuple[np.ndarray, np.ndarray]:
        idx = self.rng.integers(0, self.x_labeled.shape[0], size=self.config.batch_labeled)
        self.counters["labeled_batches"] += 1
        return self.x_labeled[idx], self.y_labeled[idx]

    def _unlabeled_minibatch(self) -> np.ndarray:
        idx = self.rng.integers(0, self.x_unlabeled.shape[0], size=self.config.batch_unlabeled)
        self.counters["unlabeled_batches"] += 1
        return self.x_unlabeled[idx]

    def _noise_minibatch(self) -> np.ndarray:
        self.counters["noise_batches"] += 1
        return self.rng.standard_normal((self.config.batch_fake, self.config.noise_dim))

    # --- objective construction ------------------------------------------

    def _srgan_d_objective(self, tape, xl, yl, xu, xf, x_hat):
        """Returns (total node, bound discriminator, term values)."""
        cfg = self.config
        bound = self.d.bind(tape)
        preds, feat_l = bound.forward(xl)
        _, feat_u = bound.forward(xu)
        _, feat_f = bound.forward(xf)
        mean_l = ad.mean_rows(feat_l)
        mean_u = ad.mean_rows(feat_u)
        mean_f = ad.mean_rows(feat_f)
        labeled = L.labeled_loss(preds, yl)
        unlabeled = L.unlabeled_loss(L.feature_distance(mean_l, mean_u), cfg.variant)
        fake = L.fake_loss(L.feature_distance(mean_f, mean_u), cfg.variant)
        if cfg.penalty_weight > 0.0:
            x_hat_leaf = tape.leaf(x_hat)
            _, feat_i = bound.forward(x_hat_leaf)
            penalty = L.penalty_term(tape, x_hat_leaf, feat_i, cfg.penalty_weight)
        else:
            penalty = tape.constant([[0.0]])
        total = ad.add(ad.add(labeled, unlabeled), ad.add(fake, penalty))
        values = tuple(float(n.value.data[0, 0]) for n in (labeled, unlabeled, fake, penalty))
        return total, bound, values

    def _apply(self, adam: Adam, model: Mlp, tape, bound, root) -> None:
        grads = ad.backward(tape, root)
        adam.apply(model.params, [grads[leaf.id].data for leaf in bound.leaves])

    # --- per-method steps --------------------------------------------------

    def _dnn_step(self, step: int) -> LossReport:
        xl, yl = self._labeled_minibatch()
        tape = ad.Tape()
        bound = self.d.bind(tape)
        preds, _ = bound.forward(xl)
        loss = L.labeled_loss(preds, yl)
        value = float(loss.value.data[0, 0])
        report = LossReport(step, value, 0.0, 0.0, 0.0, 0.0)
        if not report.is_finite():
            raise TrainingDiverged(report)
        self._apply(self.adam_d, self.d, tape, bound, loss)
        return report

    def _srgan_step(self, step: int) -> LossReport:
        cfg = self.config
        xl, yl = self._labeled_minibatch()
        xu = self._unlabeled_minibatch()
        noise = self._noise_minibatch()
        xf = self.g.predict(noise)
        # the interpolation draw happens unconditionally so the stream layout
        # does not depend on the penalty weight
        x_hat = L.interpolate_rows(xu, xf, self.rng)

        tape = ad.Tape()
        total, bound, (lab_v, unl_v, fake_v, pen_v) = self._srgan_d_objective(
            tape, xl, yl, xu, xf, x_hat
        )
        report_d = (lab_v, unl_v, fake_v, pen_v)
        self._apply(self.adam_d, self.d, tape, bound, total)

        tape_g = ad.Tape()
        bound_g = self.g.bind(tape_g)
        bound_d = self.d.bind(tape_g, trainable=False)
        fake_batch, _ = bound_g.forward(noise)
        _, feat_f = bound_d.forward(fake_batch)
        _, feat_u = bound_d.forward(xu)
        g_loss = L.generator_loss(
            L.feature_distance(ad.mean_rows(feat_f), ad.mean_rows(feat_u)), cfg.variant
        )
        g_value = float(g_loss.value.data[0, 0])
        report = LossReport(step, *report_d, g_value)
        if not report.is_finite():
            raise TrainingDiverged(report)
        self._apply(self.adam_g, self.g, tape_g, bound_g, g_loss)
        return report

    def _dggan_step(self, step: int) -> LossReport:
        xl, yl = self._labeled_minibatch()
        xu = self._unlabeled_minibatch()
        noise = self._noise_minibatch()
        xf = self.g.predict(noise)
        n_l, n_u, n_f = xl.shape[0], xu.shape[0], xf.shape[0]
        batch = np.vstack([xl, xu, xf])
        labels = np.vstack([yl, np.full((n_u + n_f, 1), np.nan)])
        fake_mask = np.repeat([False, False, True], [n_l, n_u, n_f])

        tape = ad.Tape()
        bound = self.d.bind(tape)
        out, _ = bound.forward(batch)
        preds, logits = dual_head(out)
        d_loss, _ = L.dggan_losses(preds, logits, labels, fake_mask)
        d_value = float(d_loss.value.data[0, 0])
        self._apply(self.adam_d, self.d, tape, bound, d_loss)

        tape_g = ad.Tape()
        bound_g = self.g.bind(tape_g)
        bound_d = self.d.bind(tape_g, trainable=False)
        fake_batch, _ = bound_g.forward(noise)
        out_f, _ = bound_d.forward(fake_batch)
        preds_f, logits_f = dual_head(out_f)
        _, g_loss = L.dggan_losses(
            preds_f, logits_f, np.full((n_f, 1), np.nan), np.ones(n_f, dtype=bool)
        )
        g_value = float(g_loss.value.data[0, 0])
        report = LossReport(step, d_value, 0.0, 0.0, 0.0, g_value)
        if not report.is_finite():
            raise TrainingDiverged(report)
        self._apply(self.adam_g, self.g, tape_g, bound_g, g_loss)
        return report

    def step(self, step: int) -> LossReport:
        if self.config.method is Method.DNN:
            return self._dnn_step(step)
        if self.config.method is Method.SRGAN:
            return self._srgan_step(step)
        return self._dggan_step(step)

    def run(self) -> TrainHistory:
        cfg = self.config
        history = TrainHistory()
        for step in range(1, cfg.steps + 1):
            report = self.step(step)
            if step % cfg.eval_interval == 0 or step == cfg.steps:
                history.append(HistoryEntry(step, report, evaluate(self.d, self.bundle.test)))
        return history


def evaluate(model: Mlp, test: Sequence[Example]) -> float:
    """Mean absolute error of the model's regression output on labeled examples."""
    if len(test) == 0:
        raise ValueError("empty test set")
    predictions = model.predict(observation_matrix(test))[:, :1]
    return mae(PredictionSet(predictions, label_vector(test)))


def train(config: TrainConfig, bundle: DatasetBundle) -> tuple[Mlp, Optional[Mlp], TrainHistory]:
    """Train per the config on the bundle; returns (discriminator/predictor,
    generator or None, history)."""
    trainer = Trainer(config, bundle)
    history = trainer.run()
    return trainer.d, trainer.g, history
