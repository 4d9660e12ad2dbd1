"""
Soft segmentation labels produced from box-level annotations.

Each pixel is either UNCERTAIN or carries a non-empty class set {c : s_{i,c} = 1},
stored as a 32-bit mask with bit c set for class c. The set size s_i weights the
pixel's cross-entropy terms by 1/s_i in the box-level loss; uncertain pixels are
left out of that loss altogether.

Classes:
    SoftSegLabel: Class bitmasks plus an uncertain flag per pixel.
"""

from dataclasses import dataclass
import numpy as np
from src.lib.core import Dims, BACKGROUND
from src.lib.exceptions import InvalidSoftLabelError, LabelShapeError

MAX_SOFT_CLASSES = 31


@dataclass(frozen=True)
class SoftSegLabel:
    """
    Per-pixel class sets with an UNCERTAIN state, row-major.

    Attributes:
        dims (Dims): Spatial size.
        bitmasks (np.ndarray): Read-only uint32 class masks, 0 exactly on uncertain pixels.
        uncertain (np.ndarray): Read-only bool flags.
    """
    dims: Dims
    bitmasks: np.ndarray
    uncertain: np.ndarray

    def __post_init__(self):
        bitmasks = np.array(self.bitmasks, dtype=np.uint32, copy=True).reshape(-1)
        uncertain = np.array(self.uncertain, dtype=bool, copy=True).reshape(-1)
        if bitmasks.size != self.dims.size or uncertain.size != self.dims.size:
            raise LabelShapeError(f"Soft label arrays do not fit {self.dims.h}x{self.dims.w}")
        if np.any(bitmasks[uncertain] != 0):
            raise InvalidSoftLabelError("Uncertain pixels must not carry classes")
        bitmasks.setflags(write=False)
        uncertain.setflags(write=False)
        object.__setattr__(self, "bitmasks", bitmasks)
        object.__setattr__(self, "uncertain", uncertain)

    @classmethod
    def background(cls, dims):
        """Every pixel labeled {0}."""
        return cls(dims, np.full(dims.size, 1 << BACKGROUND, dtype=np.uint32),
                   np.zeros(dims.size, dtype=bool))

    @classmethod
    def from_class_sets(cls, dims, class_sets):
        """
        Builds a label from one entry per pixel: an iterable of class ids, or None
        for UNCERTAIN.
        """
        bitmasks = np.zeros(dims.size, dtype=np.uint32)
        uncertain = np.zeros(dims.size, dtype=bool)
        for i, classes in enumerate(class_sets):
            if classes is None:
                uncertain[i] = True
                continue
            for c in classes:
                bitmasks[i] |= np.uint32(1 << int(c))
        return cls(dims, bitmasks, uncertain)

    @classmethod
    def from_pixel_labels(cls, labels):
        """
        Singleton sets from a hard label map; ignored pixels become UNCERTAIN.
        """
        counted = labels.counted
        bitmasks = np.zeros(labels.dims.size, dtype=np.uint32)
        bitmasks[counted] = np.left_shift(np.uint32(1), labels.values[counted].astype(np.uint32))
        return cls(labels.dims, bitmasks, ~counted)

    def class_set(self, i):
        """The class set of pixel i, or None if it is UNCERTAIN."""
        if self.uncertain[i]:
            return None
        mask = int(self.bitmasks[i])
        return frozenset(c for c in range(MAX_SOFT_CLASSES + 1) if mask >> c & 1)

    def membership(self, channels):
        """(h * w, channels) 0/1 matrix with entry [i, c] = s_{i,c}."""
        bits = np.arange(channels, dtype=np.uint32)
        return ((self.bitmasks[:, None] >> bits[None, :]) & 1).astype(np.float64)

    def sizes(self, channels):
        """s_i = |class set| per pixel (0 on uncertain pixels)."""
        return self.membership(channels).sum(axis=1)

    def targets(self, channels):
        """
        Soft targets t_{i,c} = s_{i,c} / s_i, zero rows on uncertain pixels.

        Raises:
            InvalidSoftLabelError: If a pixel is neither uncertain nor carries a class.
        """
        membership = self.membership(channels)
        sizes = membership.sum(axis=1)
        empty = (sizes == 0) & ~self.uncertain
        if empty.any():
            i = int(np.flatnonzero(empty)[0])
            raise InvalidSoftLabelError(
                f"Pixel {self.dims.decode(i)} has an empty class set and is not uncertain")
        if channels <= MAX_SOFT_CLASSES and np.any(self.bitmasks >> np.uint32(channels)):
            raise InvalidSoftLabelError(f"Soft label references classes beyond {channels - 1}")
        counted = ~self.uncertain
        membership[counted] /= sizes[counted, None]
        return membership

    def grid(self):
        """(h, w) bitmask grid, handy for inspection and tests."""
        return self.bitmasks.reshape(self.dims.shape)
