"""
Forward values and analytic gradients of the three annotation-specific losses.

All three losses read the same feature map f of shape (h * w, C + 1) and return a
`LossResult` holding the scalar loss and dL/df.

- image level: global average pooling, a sigmoid per class and binary cross-entropy
  over the C object classes. Background is left out, as it is present in every image.
- box level: soft cross-entropy with target t_{i,c} = s_{i,c} / s_i. Uncertain pixels
  are skipped.
- pixel level: softmax cross-entropy. Pixels with the ignore value are skipped.

The box and pixel losses are scaled by 1/C and summed over pixels, not averaged, so
their size grows with image area. With singleton class sets the box loss equals the
pixel loss exactly, because both go through `_soft_cross_entropy`.
"""

import numpy as np
from src.lib.core import (
    ClassScoreVector,
    FeatureMap,
    LossResult,
    log_softmax,
    log_sigmoid,
    sigmoid,
)
from src.lib.exceptions import InvalidImageLabelError, LabelRangeError, LabelShapeError


def global_average_pool(f):
    """
    v_c = mean over all pixels of f[:, c], for every channel c including background.
    """
    return ClassScoreVector(f.values.mean(axis=0))


def image_loss(f, label):
    """
    Multi-label binary cross-entropy on the pooled scores, background excluded.

    value = -(1/C) * sum_{c=1..C} [l_c log sigmoid(v_c) + (1 - l_c) log(1 - sigmoid(v_c))]
    dL/df_{i,c} = (sigmoid(v_c) - l_c) / (C * |pixels|) for c >= 1, and 0 on channel 0.

    Raises:
        InvalidImageLabelError: If the presence vector length is not C.
    """
    num_classes = f.channels - 1
    if label.num_classes != num_classes:
        raise InvalidImageLabelError(
            f"Presence vector has {label.num_classes} entries, feature map has C={num_classes}")
    v = global_average_pool(f).values[1:]
    present = label.presence.astype(np.float64)
    # log(1 - sigmoid(v)) = log sigmoid(-v)
    value = -(present * log_sigmoid(v) + (1.0 - present) * log_sigmoid(-v)).sum() / num_classes
    grad = np.zeros_like(f.values)
    grad[:, 1:] = (sigmoid(v) - present) / (num_classes * f.dims.size)
    return LossResult(value, FeatureMap(f.dims, grad))


def _soft_cross_entropy(f, targets, counted):
    num_classes = f.channels - 1
    log_q = log_softmax(f.values[counted])
    rows = targets[counted]
    value = -(rows * log_q).sum() / num_classes
    grad = np.zeros_like(f.values)
    grad[counted] = (np.exp(log_q) - rows) / num_classes
    return LossResult(value, FeatureMap(f.dims, grad))


def _check_dims(f, label):
    if label.dims != f.dims:
        raise LabelShapeError(
            f"Label is {label.dims.h}x{label.dims.w}, feature map is {f.dims.h}x{f.dims.w}")


def box_loss(f, soft):
    """
    Soft cross-entropy against a `SoftSegLabel`.

    A pixel with class set S contributes -(1/C)(1/|S|) sum_{c in S} log q_{i,c}, where q is
    the row softmax. Its gradient row is (q_i - t_i)/C. Uncertain pixels contribute
    nothing.

    Raises:
        LabelShapeError: If dims differ.
        InvalidSoftLabelError: If a non-uncertain pixel has an empty class set.
    """
    _check_dims(f, soft)
    return _soft_cross_entropy(f, soft.targets(f.channels), ~soft.uncertain)


def pixel_loss(f, labels):
    """
    Softmax cross-entropy against hard labels, skipping ignored pixels.

    value = -(1/C) sum_i log q_{i,p_i};  dL/df_{i,j} = (q_{i,j} - 1[p_i = j]) / C.

    Raises:
        LabelShapeError: If dims differ.
        LabelRangeError: If a label is above C and not the ignore value.
    """
    _check_dims(f, labels)
    num_classes = f.channels - 1
    counted = labels.counted
    bad = counted & ((labels.values < 0) | (labels.values > num_classes))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise LabelRangeError(
            f"Pixel {f.dims.decode(i)} has label {labels.values[i]}, outside 0..{num_classes} "
            f"and not the ignore value {labels.ignore_value}")
    targets = np.zeros_like(f.values)
    rows = np.flatnonzero(counted)
    targets[rows, labels.values[rows]] = 1.0
    return _soft_cross_entropy(f, targets, counted)
