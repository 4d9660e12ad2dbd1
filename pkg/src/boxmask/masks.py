"""
Box-to-mask pipeline: turns bounding boxes and a boundary-strength map into soft labels.

For each box the strengths inside the box are min-max normalized, then cut at every
threshold (default 1/4, 1/2, 3/4). At each cutoff the region is the 4-connected flood
fill from the box's center pixel over non-boundary pixels, closed up to its outermost
boundary (pixels the region encloses are filled in), giving nested masks from
fine (low cutoff) to coarse (high cutoff). The first mask covering at least alpha
percent of the box becomes the object's confident mask, and whatever the coarsest
mask adds on top of it is marked uncertain. Box pixels outside every mask stay
available to background.

Overlapping confident masks of different classes give soft pixels with several
classes. A confident claim beats an uncertain one, and an uncertain claim beats
background.

Classes:
    BoundingBox: Class id and inclusive pixel corners.
    BoundaryStrengthMap: UCM-style boundary strengths per pixel.
    BoxMaskConfig: Alpha percent, thresholds and connectivity.
    ObjectMask: Confident and uncertain pixels of one box, in box-local coordinates.

Functions:
    normalize_strength, threshold_fill, scale_masks, select_confident, box_to_mask,
    merge_masks, raw_box_label, harden
"""

import logging
from dataclasses import dataclass, field
import numpy as np
from scipy import ndimage
from src.lib.core import Dims, BACKGROUND, IGNORE_VALUE
from src.lib.exceptions import (
    InvalidBoxError,
    InvalidStrengthMapError,
    InvalidMaskConfigError,
    InvalidThresholdError,
)
from src.boxmask.soft_label import SoftSegLabel, MAX_SOFT_CLASSES
from src.losses.labels import PixelLabelMap

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.25, 0.5, 0.75)
DEFAULT_ALPHA_PERCENT = 30.0

# 4-connectivity
FOUR_NEIGHBORS = ndimage.generate_binary_structure(2, 1)
# the complement of a 4-connected region is 8-connected
EIGHT_NEIGHBORS = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class BoundingBox:
    """
    An object box with inclusive pixel corners (x0, y0) and (x1, y1).
    """
    class_id: int
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for name in ("class_id", "x0", "y0", "x1", "y1"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.class_id < 1:
            raise InvalidBoxError(f"Boxes must carry an object class, got {self.class_id}")
        if not (0 <= self.x0 <= self.x1 and 0 <= self.y0 <= self.y1):
            raise InvalidBoxError(f"Malformed box corners {self}")

    @property
    def width(self):
        return self.x1 - self.x0 + 1

    @property
    def height(self):
        return self.y1 - self.y0 + 1

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        """The seed pixel (floor((x0+x1)/2), floor((y0+y1)/2))."""
        return (self.x0 + self.x1) // 2, (self.y0 + self.y1) // 2

    @property
    def slices(self):
        """(rows, cols) slices selecting the box from an (h, w) grid."""
        return slice(self.y0, self.y1 + 1), slice(self.x0, self.x1 + 1)

    def validate(self, dims, num_object_classes=None):
        """
        Raises `InvalidBoxError` unless the box lies inside dims (and its class is <= C).
        """
        if self.x1 >= dims.w or self.y1 >= dims.h:
            raise InvalidBoxError(f"Box {self} exceeds image {dims.h}x{dims.w}")
        if num_object_classes is not None and self.class_id > num_object_classes:
            raise InvalidBoxError(f"Box class {self.class_id} exceeds C={num_object_classes}")
        return self


@dataclass(frozen=True)
class BoundaryStrengthMap:
    """
    Nonnegative boundary strength per pixel, as an (h, w) float64 grid.
    """
    dims: Dims
    strength: np.ndarray

    def __post_init__(self):
        strength = np.array(self.strength, dtype=np.float64, copy=True)
        if strength.shape != self.dims.shape:
            raise InvalidStrengthMapError(
                f"Strength grid {strength.shape} does not match {self.dims.h}x{self.dims.w}")
        if not np.all(np.isfinite(strength)) or np.any(strength < 0):
            raise InvalidStrengthMapError("Boundary strengths must be finite and nonnegative")
        strength.setflags(write=False)
        object.__setattr__(self, "strength", strength)

    @classmethod
    def from_grid(cls, grid):
        grid = np.asarray(grid)
        return cls(Dims(*grid.shape), grid)


@dataclass(frozen=True)
class BoxMaskConfig:
    """
    Parameters of the box-to-mask pipeline.

    Attributes:
        alpha_percent (float): Minimum confident-mask area, in percent of the box area.
        thresholds (tuple): Strictly increasing strength cutoffs in (0, 1).
        connectivity (int): Flood-fill neighborhood; only 4 is supported.
        fill_holes (bool): Close each region up to its outermost boundary.
    """
    alpha_percent: float = DEFAULT_ALPHA_PERCENT
    thresholds: tuple = field(default=DEFAULT_THRESHOLDS)
    connectivity: int = 4
    fill_holes: bool = True

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not 0 < self.alpha_percent <= 100:
            raise InvalidMaskConfigError(f"alpha_percent must be in (0, 100], got {self.alpha_percent}")
        if not self.thresholds:
            raise InvalidMaskConfigError("At least one strength threshold is required")
        if any(not 0 < t < 1 for t in self.thresholds):
            raise InvalidMaskConfigError(f"Thresholds must lie in (0, 1), got {self.thresholds}")
        if any(a >= b for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise InvalidMaskConfigError(f"Thresholds must increase strictly, got {self.thresholds}")
        if self.connectivity != 4:
            raise InvalidMaskConfigError("Only 4-connected flood fill is supported")


@dataclass(frozen=True)
class ObjectMask:
    """
    The mask generated for one box. `confident` and `uncertain` are box-shaped bool
    arrays (height x width of the box), disjoint by construction.
    """
    box: BoundingBox
    confident: np.ndarray
    uncertain: np.ndarray
    fallback: bool = False

    def __post_init__(self):
        shape = (self.box.height, self.box.width)
        confident = np.array(self.confident, dtype=bool, copy=True)
        uncertain = np.array(self.uncertain, dtype=bool, copy=True)
        if confident.shape != shape or uncertain.shape != shape:
            raise InvalidBoxError(f"Mask arrays do not match box shape {shape}")
        if np.any(confident & uncertain):
            raise InvalidBoxError("Confident and uncertain pixels overlap")
        confident.setflags(write=False)
        uncertain.setflags(write=False)
        object.__setattr__(self, "confident", confident)
        object.__setattr__(self, "uncertain", uncertain)

    def full_image(self, dims):
        """(confident, uncertain) as (h, w) grids of the whole image."""
        confident = np.zeros(dims.shape, dtype=bool)
        uncertain = np.zeros(dims.shape, dtype=bool)
        confident[self.box.slices] = self.confident
        uncertain[self.box.slices] = self.uncertain
        return confident, uncertain


def normalize_strength(ucm, box):
    """
    Min-max normalizes the strengths inside a box to [0, 1].

    A box whose strengths are all equal (including a single-pixel box) normalizes to
    zeros, i.e. the whole box is treated as object interior.

    Returns:
        np.ndarray: float64 grid of the box's shape.
    """
    box.validate(ucm.dims)
    patch = ucm.strength[box.slices]
    low, high = patch.min(), patch.max()
    if high == low:
        return np.zeros(patch.shape)
    return (patch - low) / (high - low)


def threshold_fill(norm, t):
    """
    Flood-fills the region around the grid's center pixel at strength cutoff t.

    Pixels with normalized strength >= t are boundary. The region is the 4-connected
    component of non-boundary pixels containing the center pixel
    (floor((width-1)/2), floor((height-1)/2)), or empty when the center is boundary.

    Raises:
        InvalidThresholdError: If t is outside (0, 1).
    """
    if not 0 < t < 1:
        raise InvalidThresholdError(f"Strength cutoff must lie in (0, 1), got {t}")
    norm = np.asarray(norm)
    height, width = norm.shape
    cy, cx = (height - 1) // 2, (width - 1) // 2
    interior = norm < t
    if not interior[cy, cx]:
        return np.zeros(norm.shape, dtype=bool)
    components, _ = ndimage.label(interior, structure=FOUR_NEIGHBORS)
    return components == components[cy, cx]


def scale_masks(norm, cfg):
    """
    One region per threshold of cfg, fine to coarse.

    With `cfg.fill_holes`, boundary pixels and pockets the region surrounds (strokes inside
    an object, say) become part of the region; whatever is 8-connected to the box edge
    outside the region stays out. Filling keeps the regions nested.
    """
    masks = [threshold_fill(norm, t) for t in cfg.thresholds]
    if cfg.fill_holes:
        masks = [ndimage.binary_fill_holes(m, structure=EIGHT_NEIGHBORS) for m in masks]
    return masks


def select_confident(masks, box, cfg):
    """
    Picks the confident mask from masks ordered fine to coarse.

    The first mask whose area reaches alpha percent of the box wins. When none does,
    the coarsest mask is used. Uncertain pixels are those of the coarsest mask that
    are not confident.

    Returns:
        tuple: (confident, uncertain, fallback) where fallback tells whether no mask
        reached alpha percent.
    """
    coarsest = masks[-1]
    for mask in masks:
        if mask.sum() * 100.0 >= cfg.alpha_percent * box.area:
            confident = mask
            fallback = False
            break
    else:
        confident = coarsest
        fallback = True
    return confident.copy(), coarsest & ~confident, fallback


def box_to_mask(ucm, box, cfg):
    """
    Runs normalization, one filled region per threshold and confident selection for one box.

    Returns:
        ObjectMask: The box's confident and uncertain pixels; the confident pixels carry
        `box.class_id`. An empty confident mask is legal.
    """
    masks = scale_masks(normalize_strength(ucm, box), cfg)
    confident, uncertain, fallback = select_confident(masks, box, cfg)
    if fallback:
        log.warning("No mask reached %.1f%% of box %s, using the coarsest mask",
                    cfg.alpha_percent, box)
    log.debug("Box %s: confident %d px, uncertain %d px", box, confident.sum(), uncertain.sum())
    return ObjectMask(box, confident, uncertain, fallback)


def merge_masks(masks, dims, classes=None):
    """
    Combines per-box masks into one soft label.

    A pixel inside confident masks gets the set of their classes. A pixel only claimed as
    uncertain becomes UNCERTAIN. A pixel in no mask gets {0}. Masks are OR-ed together,
    so the result does not depend on the order of `masks`.

    Args:
        masks (list[ObjectMask]): Masks inside dims.
        dims (Dims): Image size.
        classes (ClassConfig, optional): When given, box classes are checked against C.
    """
    bits = np.zeros(dims.shape, dtype=np.uint32)
    uncertain = np.zeros(dims.shape, dtype=bool)
    for mask in masks:
        mask.box.validate(dims, classes.num_object_classes if classes else None)
        if mask.box.class_id > MAX_SOFT_CLASSES:
            raise InvalidBoxError(f"Soft labels hold at most {MAX_SOFT_CLASSES} classes")
        rows, cols = mask.box.slices
        bits[rows, cols] |= mask.confident.astype(np.uint32) << np.uint32(mask.box.class_id)
        uncertain[rows, cols] |= mask.uncertain
    uncertain &= bits == 0
    bits[(bits == 0) & ~uncertain] = 1 << BACKGROUND
    return SoftSegLabel(dims, bits, uncertain)


def raw_box_label(boxes, dims, classes=None):
    """
    Labels every pixel inside a box with the box's class; overlaps become soft sets and
    pixels outside every box are background. No pixel is uncertain.
    """
    masks = [ObjectMask(box, np.ones((box.height, box.width), dtype=bool),
                        np.zeros((box.height, box.width), dtype=bool))
             for box in boxes]
    return merge_masks(masks, dims, classes)


def harden(soft, seed, ignore_value=IGNORE_VALUE):
    """
    Collapses a soft label into hard labels.

    Singleton sets copy through and UNCERTAIN pixels become `ignore_value`. Pixels with
    several classes are grouped into 4-connected regions of identical class sets, and
    each region receives one class drawn uniformly from its set with a generator seeded
    by `seed`. Regions are visited in a fixed order (by bitmask value, then raster order
    of the region), so equal inputs and seeds give identical outputs.

    Returns:
        PixelLabelMap: The hard pseudo-labels.
    """
    rng = np.random.default_rng(seed)
    bits = soft.grid()
    labels = np.full(soft.dims.shape, ignore_value, dtype=np.int64)
    counted = ~soft.uncertain.reshape(soft.dims.shape)
    single = counted & (bits & (bits - np.uint32(1)) == 0)
    labels[single] = np.log2(bits[single]).astype(np.int64)
    multi = counted & ~single
    for value in np.unique(bits[multi]):
        choices = [c for c in range(MAX_SOFT_CLASSES + 1) if int(value) >> c & 1]
        regions, count = ndimage.label(multi & (bits == value), structure=FOUR_NEIGHBORS)
        for region in range(1, count + 1):
            labels[regions == region] = choices[rng.integers(len(choices))]
    return PixelLabelMap(soft.dims, labels.reshape(-1), ignore_value)
