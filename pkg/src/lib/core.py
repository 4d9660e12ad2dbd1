"""
Shared dense-grid types and numerically stable helpers.

Every other package builds on the value types defined here. They are immutable once
constructed: array fields are copied and marked read-only, so instances can be shared
freely between threads and worker processes.

Pixel layout:
    Pixels are stored row-major. Pixel (x, y) of an image with width w has the flat
    index i = y * w + x. A feature map is an array of shape (h * w, C + 1) in that order,
    so `values.reshape(h, w, C + 1)` gives the spatial grid back.

Precision:
    Feature maps, score vectors and loss gradients are float64 regardless of the network's
    own dtype, which leaves headroom for finite-difference gradient checks.

Classes:
    Dims: Image height and width.
    ClassConfig: Object class count C and the ignore raster value.
    FeatureMap: Per-pixel, per-class scores f.
    ClassScoreVector: One score per channel (global pooling output).
    LossResult: A loss value and its gradient with respect to the feature map.

Functions:
    stable_softmax_row: Softmax of one score vector.
    stable_softmax: Row-wise softmax of a (N, K) array.
    log_softmax: Row-wise log-softmax via log-sum-exp.
    sigmoid: Logistic function.
    log_sigmoid: Logarithm of the logistic function.
"""

from dataclasses import dataclass
import numpy as np
from src.lib.exceptions import (
    InvalidDimsError,
    InvalidClassConfigError,
    CorruptFeatureMapError,
)

BACKGROUND = 0
IGNORE_VALUE = 255
PROBABILITY_FLOOR = 1e-300


def _frozen(array, dtype):
    frozen = np.array(array, dtype=dtype, copy=True)
    frozen.setflags(write=False)
    return frozen


@dataclass(frozen=True)
class Dims:
    """
    Height and width of an image, in pixels.
    """
    h: int
    w: int

    def __post_init__(self):
        if int(self.h) < 1 or int(self.w) < 1:
            raise InvalidDimsError(f"Image dims must be positive, got {self.h}x{self.w}")
        object.__setattr__(self, "h", int(self.h))
        object.__setattr__(self, "w", int(self.w))

    @property
    def size(self):
        """Number of pixels |Ω| = h * w."""
        return self.h * self.w

    @property
    def shape(self):
        """The (h, w) tuple used for numpy grids."""
        return (self.h, self.w)

    def encode(self, x, y):
        """Flat row-major index of pixel (x, y)."""
        if not (0 <= x < self.w and 0 <= y < self.h):
            raise InvalidDimsError(f"Pixel ({x}, {y}) outside {self.h}x{self.w}")
        return y * self.w + x

    def decode(self, i):
        """Inverse of `encode`: the (x, y) of flat index i."""
        if not 0 <= i < self.size:
            raise InvalidDimsError(f"Pixel index {i} outside {self.h}x{self.w}")
        y, x = divmod(i, self.w)
        return x, y


@dataclass(frozen=True)
class ClassConfig:
    """
    Number of object classes C (background excluded) and the ignore raster value.

    The background class always occupies channel 0, so feature maps carry C + 1 channels.
    """
    num_object_classes: int
    ignore_value: int = IGNORE_VALUE

    def __post_init__(self):
        if int(self.num_object_classes) < 1:
            raise InvalidClassConfigError(
                f"At least one object class is required, got {self.num_object_classes}")
        if 0 <= self.ignore_value <= self.num_object_classes:
            raise InvalidClassConfigError(
                f"Ignore value {self.ignore_value} collides with a class index")

    @property
    def channels(self):
        """Total channel count C + 1."""
        return self.num_object_classes + 1


@dataclass(frozen=True)
class FeatureMap:
    """
    Per-class score grid f with shape (h * w, C + 1), row-major pixels.

    Attributes:
        dims (Dims): Spatial size.
        values (np.ndarray): Read-only float64 scores.
    """
    dims: Dims
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        if values.ndim != 2 or values.shape[0] != self.dims.size or values.shape[1] < 2:
            raise CorruptFeatureMapError(
                f"Feature map of shape {values.shape} does not fit {self.dims.h}x{self.dims.w}")
        if not np.all(np.isfinite(values)):
            raise CorruptFeatureMapError("Feature map holds non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_grid(cls, grid):
        """Builds a feature map from an (h, w, C + 1) array."""
        grid = np.asarray(grid)
        if grid.ndim != 3:
            raise CorruptFeatureMapError(f"Expected an (h, w, channels) grid, got {grid.shape}")
        h, w, channels = grid.shape
        return cls(Dims(h, w), grid.reshape(h * w, channels))

    @classmethod
    def zeros(cls, dims, channels):
        """An all-zero map, also the shape template for gradients."""
        return cls(dims, np.zeros((dims.size, channels)))

    @property
    def channels(self):
        """Channel count C + 1."""
        return self.values.shape[1]

    def as_grid(self):
        """The (h, w, C + 1) view of the scores."""
        return self.values.reshape(self.dims.h, self.dims.w, self.channels)

    def check_classes(self, classes):
        """Raises `CorruptFeatureMapError` unless the channel count is C + 1."""
        if self.channels != classes.channels:
            raise CorruptFeatureMapError(
                f"Feature map has {self.channels} channels, expected {classes.channels}")


@dataclass(frozen=True)
class ClassScoreVector:
    """
    One real score per channel, length C + 1.
    """
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float64)
        if values.ndim != 1:
            raise CorruptFeatureMapError(f"Score vector must be 1-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise CorruptFeatureMapError("Score vector holds non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class LossResult:
    """
    A scalar loss and its gradient with respect to the feature map.
    """
    value: float
    grad: FeatureMap

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise CorruptFeatureMapError(f"Loss value is not finite: {self.value}")
        object.__setattr__(self, "value", float(self.value))


def _require_finite(values):
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise CorruptFeatureMapError("Non-finite scores, the feature map is corrupted")
    return values


def log_softmax(values):
    """
    Row-wise log-softmax of a (N, K) array computed through log-sum-exp.

    Results are floored at log(1e-300) so a saturated row never yields -inf.
    """
    values = _require_finite(values)
    shifted = values - values.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return np.maximum(shifted - log_norm, np.log(PROBABILITY_FLOOR))


def stable_softmax(values):
    """
    Row-wise softmax of a (N, K) array with max-subtraction.
    """
    values = _require_finite(values)
    shifted = np.exp(values - values.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def stable_softmax_row(scores):
    """
    Softmax of a single score vector.

    Args:
        scores (ClassScoreVector | array-like): One score per channel.

    Returns:
        np.ndarray: Probabilities summing to 1, invariant to adding a constant to all scores.

    Raises:
        CorruptFeatureMapError: If any score is not finite.
    """
    values = scores.values if isinstance(scores, ClassScoreVector) else scores
    return stable_softmax(np.atleast_1d(values))


def log_sigmoid(x):
    """
    log(1 / (1 + e^-x)), stable for large |x|.
    """
    return -np.logaddexp(0.0, -_require_finite(x))


def sigmoid(x):
    """
    Logistic function 1 / (1 + e^-x).

    Computed as exp(log_sigmoid(x)) so neither tail overflows; sigmoid(-x) equals
    1 - sigmoid(x) to within rounding. Scalars come back as Python floats.
    """
    result = np.exp(log_sigmoid(x))
    if np.ndim(result) == 0:
        return float(result)
    return result
