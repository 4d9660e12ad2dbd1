"""
Label types consumed by the image-level and pixel-level loss branches.

Classes:
    ImageLabel: Presence vector l = [l_1 .. l_C]; background is not part of it.
    PixelLabelMap: Per-pixel class index in {0..C} or the ignore value.
"""

from dataclasses import dataclass
import numpy as np
from src.lib.core import Dims, IGNORE_VALUE
from src.lib.exceptions import InvalidImageLabelError, LabelRangeError, LabelShapeError


@dataclass(frozen=True)
class ImageLabel:
    """
    Binary presence vector over the C object classes.

    Attributes:
        presence (np.ndarray): Read-only int array of 0/1 values, length C.
    """
    presence: np.ndarray

    def __post_init__(self):
        presence = np.array(self.presence, dtype=np.int64, copy=True)
        if presence.ndim != 1 or presence.size == 0:
            raise InvalidImageLabelError(f"Presence vector must be 1-D and non-empty, got {presence.shape}")
        if not np.all((presence == 0) | (presence == 1)):
            raise InvalidImageLabelError(f"Presence vector must be binary, got {presence.tolist()}")
        presence.setflags(write=False)
        object.__setattr__(self, "presence", presence)

    @classmethod
    def from_pixel_labels(cls, labels, num_object_classes):
        """Presence vector derived from ground truth: l_c = 1 iff class c occurs."""
        present = np.zeros(num_object_classes, dtype=np.int64)
        values = labels.values[labels.values != labels.ignore_value]
        for c in np.unique(values):
            if c > 0:
                present[c - 1] = 1
        return cls(present)

    @property
    def num_classes(self):
        """C, the vector length."""
        return self.presence.size

    def require_positive(self):
        """
        Rejects all-zero vectors, which carry no usable supervision.

        Raises:
            InvalidImageLabelError: If no class is marked present.
        """
        if not self.presence.any():
            raise InvalidImageLabelError("Image label marks no object class as present")
        return self


@dataclass(frozen=True)
class PixelLabelMap:
    """
    Hard per-pixel labels p_i, stored row-major as a flat array of length h * w.

    Attributes:
        dims (Dims): Spatial size.
        values (np.ndarray): Read-only int64 labels in {0..C} or `ignore_value`.
        ignore_value (int): Raster code for ignored pixels.
    """
    dims: Dims
    values: np.ndarray
    ignore_value: int = IGNORE_VALUE

    def __post_init__(self):
        values = np.array(self.values, dtype=np.int64, copy=True).reshape(-1)
        if values.size != self.dims.size:
            raise LabelShapeError(
                f"{values.size} labels do not fit {self.dims.h}x{self.dims.w}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_grid(cls, grid, ignore_value=IGNORE_VALUE):
        """Builds a label map from an (h, w) array."""
        grid = np.asarray(grid)
        if grid.ndim != 2:
            raise LabelShapeError(f"Expected an (h, w) label grid, got {grid.shape}")
        return cls(Dims(*grid.shape), grid.reshape(-1), ignore_value)

    def as_grid(self):
        """The (h, w) view of the labels."""
        return self.values.reshape(self.dims.shape)

    @property
    def counted(self):
        """Boolean mask of pixels that are not ignored."""
        return self.values != self.ignore_value

    def validate(self, classes):
        """
        Checks every label lies in {0..C} or equals the ignore value.

        Raises:
            LabelRangeError: On the first out-of-range label.
        """
        bad = self.counted & ((self.values < 0) | (self.values > classes.num_object_classes))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise LabelRangeError(
                f"Pixel {self.dims.decode(i)} has label {self.values[i]}, "
                f"outside 0..{classes.num_object_classes} and not {self.ignore_value}")
        return self
