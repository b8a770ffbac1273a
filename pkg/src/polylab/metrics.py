"""Agreement and calibration metrics: Cohen's kappa, expected calibration
error, accuracy, and wall-clock timing."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgument

DEFAULT_ECE_BINS = 40


@dataclass(frozen=True)
class ConfusionMatrix:
    """C x C counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.counts, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidArgument("confusion matrix must be square")
        if (m < 0).any():
            raise InvalidArgument("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", m)
        self.counts.setflags(write=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def degenerate(self) -> bool:
        """True when chance agreement is exactly 1 (a single nonzero cell
        on one class), in which case kappa is 0 by convention."""
        n = self.total
        if n == 0:
            return False
        p_c = float((self.counts.sum(1) / n) @ (self.counts.sum(0) / n))
        return p_c == 1.0

    @staticmethod
    def from_predictions(preds, truth, class_count: int) -> "ConfusionMatrix":
        preds = np.asarray(preds, dtype=np.int64)
        truth = np.asarray(truth, dtype=np.int64)
        if preds.shape != truth.shape:
            raise InvalidArgument("predictions and truth differ in length")
        m = np.zeros((class_count, class_count), dtype=np.int64)
        np.add.at(m, (truth, preds), 1)
        return ConfusionMatrix(m)


@dataclass(frozen=True)
class CalibrationBins:
    """Equal-width confidence bins over [0, 1]."""

    bin_count: int
    counts: np.ndarray
    accuracy: np.ndarray
    mean_confidence: np.ndarray


def cohen_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement (p_o - p_c) / (1 - p_c).

    Observed agreement p_o is the diagonal fraction; chance agreement p_c is
    the dot product of the row and column marginals. A degenerate matrix
    with p_c = 1 returns 0 by convention (see ConfusionMatrix.degenerate).
    """
    n = cm.total
    if n < 1:
        raise InvalidArgument("empty confusion matrix")
    p_o = float(np.trace(cm.counts)) / n
    p_c = float((cm.counts.sum(1) / n) @ (cm.counts.sum(0) / n))
    if p_c == 1.0:
        return 0.0
    return (p_o - p_c) / (1.0 - p_c)


def binned_calibration(probs, truth, bins: int = DEFAULT_ECE_BINS) -> CalibrationBins:
    """Bin max-probability confidences into equal widths.

    A confidence landing exactly on an interior bin edge joins the upper
    bin; confidence 1.0 joins the last bin.
    """
    probs = np.asarray(probs, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != truth.shape[0]:
        raise InvalidArgument("probs must be n x C aligned with truth")
    if bins < 1:
        raise InvalidArgument("bins must be >= 1")
    sums = probs.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-9:
        raise InvalidArgument("probability rows must sum to 1 within 1e-9")
    conf = probs.max(axis=1)
    correct = probs.argmax(axis=1) == truth
    idx = np.minimum(np.floor(conf * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    acc = np.zeros(bins)
    mean_conf = np.zeros(bins)
    nonzero = counts > 0
    acc[nonzero] = np.bincount(idx, weights=correct, minlength=bins)[nonzero] / counts[nonzero]
    mean_conf[nonzero] = np.bincount(idx, weights=conf, minlength=bins)[nonzero] / counts[nonzero]
    return CalibrationBins(bins, counts, acc, mean_conf)


def ece(probs, truth, bins: int = DEFAULT_ECE_BINS) -> float:
    """Expected calibration error: count-weighted |accuracy - confidence|."""
    cal = binned_calibration(probs, truth, bins)
    n = cal.counts.sum()
    weights = cal.counts / n
    return float(np.sum(weights * np.abs(cal.accuracy - cal.mean_confidence)))


def accuracy(preds, truth) -> float:
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise InvalidArgument("predictions and truth differ in length")
    return float(np.mean(preds == truth))


def timed(fn: Callable, *args, **kwargs):
    """Run fn(*args, **kwargs), returning (result, wall seconds)."""
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start
