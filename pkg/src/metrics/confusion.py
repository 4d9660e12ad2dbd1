"""
Confusion matrix and the four segmentation metrics.

With n_ij the number of pixels of ground-truth class i predicted as class j,
t_i = sum_j n_ij and U_i = t_i + sum_j n_ji - n_ii:

    pAcc = sum_i n_ii / sum_i t_i
    mAcc = mean of n_ii / t_i over classes with t_i > 0
    mIU  = mean of n_ii / U_i over classes with U_i > 0
    fwIU = (sum_k t_k)^-1 * sum_i t_i * n_ii / U_i

Means run over the classes that actually occur; absent classes are left out rather than
counted as zero. Background takes part like any other class.
"""

from dataclasses import dataclass
import numpy as np
from src.lib.exceptions import (
    DimensionMismatchError,
    EmptyConfusionMatrixError,
    LabelRangeError,
    MetricsError,
)

METRIC_KEYS = ("pAcc", "mAcc", "mIU", "fwIU")


@dataclass(frozen=True)
class ConfusionMatrix:
    """
    Counts n_ij of shape (C + 1, C + 1); rows are ground truth, columns predictions.
    """
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DimensionMismatchError(f"Confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise MetricsError("Confusion counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def empty(cls, channels):
        return cls(np.zeros((channels, channels), dtype=np.int64))

    @property
    def channels(self):
        return self.counts.shape[0]

    @property
    def totals(self):
        """t_i, the ground-truth pixel count per class."""
        return self.counts.sum(axis=1)

    def __add__(self, other):
        if other.channels != self.channels:
            raise DimensionMismatchError(f"Cannot add {self.channels}- and {other.channels}-class matrices")
        return ConfusionMatrix(self.counts + other.counts)


def accumulate(cm, pred, gt):
    """
    Adds one image to the matrix.

    Pixels whose ground truth is the ignore value are skipped.

    Args:
        cm (ConfusionMatrix): Running matrix.
        pred (PixelLabelMap): Predicted labels in 0..C.
        gt (PixelLabelMap): Ground truth in 0..C or the ignore value.

    Returns:
        ConfusionMatrix: A new matrix; `cm` is not modified.

    Raises:
        DimensionMismatchError: If pred and gt differ in dims.
        LabelRangeError: If a counted label lies outside 0..C.
    """
    if pred.dims != gt.dims:
        raise DimensionMismatchError(
            f"Prediction is {pred.dims.h}x{pred.dims.w}, ground truth is {gt.dims.h}x{gt.dims.w}")
    counted = gt.counted
    truth = gt.values[counted]
    guess = pred.values[counted]
    channels = cm.channels
    if truth.size and (truth.min() < 0 or truth.max() >= channels or guess.min() < 0 or guess.max() >= channels):
        raise LabelRangeError(f"Labels outside 0..{channels - 1} cannot be tallied")
    tally = np.bincount(channels * truth + guess, minlength=channels ** 2)
    return ConfusionMatrix(cm.counts + tally.reshape(channels, channels))


def compute_metrics(cm):
    """
    Computes pAcc, mAcc, mIU and fwIU.

    Returns:
        dict: The four metrics plus "per_class_iu", a list with one entry per class and
        None where the class union is empty.

    Raises:
        EmptyConfusionMatrixError: If the matrix counts no pixel.
    """
    counts = cm.counts.astype(np.float64)
    totals = counts.sum(axis=1)
    if totals.sum() == 0:
        raise EmptyConfusionMatrixError("No counted pixels: metrics are undefined")
    hits = np.diag(counts)
    unions = totals + counts.sum(axis=0) - hits
    present = totals > 0
    occurring = unions > 0
    iu = np.divide(hits, unions, out=np.zeros_like(hits), where=occurring)
    return {
        "pAcc": float(hits.sum() / totals.sum()),
        "mAcc": float(np.mean(hits[present] / totals[present])),
        "mIU": float(np.mean(iu[occurring])),
        "fwIU": float((totals * iu).sum() / totals.sum()),
        "per_class_iu": [float(v) if ok else None for v, ok in zip(iu, occurring)],
    }
