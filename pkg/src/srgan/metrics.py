"""Evaluation metrics over paired prediction/target lists."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PredictionSet:
    """Aligned predictions and ground-truth values."""

    predicted: np.ndarray
    actual: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.predicted, dtype=np.float64).ravel()
        act = np.asarray(self.actual, dtype=np.float64).ravel()
        if pred.size != act.size:
            raise ValueError(f"length mismatch: {pred.size} predictions vs {act.size} actuals")
        if pred.size == 0:
            raise ValueError("need at least one prediction")
        pred.flags.writeable = False
        act.flags.writeable = False
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "actual", act)


def mae(p: PredictionSet) -> float:
    """Mean absolute error."""
    return float(np.abs(p.predicted - p.actual).mean())


def nae_range(p: PredictionSet, y_min: float, y_max: float) -> float:
    """Range-normalized absolute error as a percentage:
    mean(|error| / (y_max − y_min)) × 100."""
    if not y_max > y_min:
        raise ValueError(f"degenerate range [{y_min}, {y_max}]")
    return float(np.abs(p.predicted - p.actual).mean() / (y_max - y_min) * 100.0)


def nae_relative(p: PredictionSet) -> float:
    """Magnitude-normalized absolute error: mean(|error| / actual);
    actuals must all be positive."""
    if not np.all(p.actual > 0.0):
        raise ValueError("relative normalization requires positive actual values")
    return float((np.abs(p.predicted - p.actual) / p.actual).mean())


def rmse(p: PredictionSet) -> float:
    """Root mean squared error."""
    return float(np.sqrt(((p.predicted - p.actual) ** 2).mean()))


def relative_error(mae_model: float, mae_baseline: float) -> float:
    """Error ratio of a model against a baseline, mae_model / mae_baseline."""
    if not mae_baseline > 0.0:
        raise ValueError(f"baseline error must be positive, got {mae_baseline}")
    return mae_model / mae_baseline
