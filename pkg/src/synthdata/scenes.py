"""
Synthetic shape scenes with complete ground truth.

A scene holds one to three objects drawn back to front on a textured background. Each
class has its own shape and colour: disc, square, triangle and ring for the default four
classes, cycling through the shapes with new colours beyond that. Centres and radii are
whole pixels, so every shape is symmetric about its box centre and the box-centre seed
of the mask pipeline lands inside the object. The ring's hole is off-centre for the same
reason.

Ground truth:
    instances   depth of the visible object per pixel, -1 for background
    pixels      class of the visible object, 0 for background
    boxes       tight bounds of each object's full (pre-occlusion) extent, kept only for
                objects with at least one visible pixel
    image_label presence vector derived from `pixels`

The boundary-strength map is the pixel-wise maximum of three layers with disjoint ranges:

    contours     [0.75, 1.0]   pixels with a 4-neighbour of greater depth
    texture      [0.3, 0.55]   short strokes inside objects, at least one pixel (in all
                               eight directions) away from the object's edge
    distractors  [0.05, 0.3]   short strokes on the background

Strengths are drawn directly on the 8-bit grid they are stored with, from the levels
inside each range, so quantization never moves a pixel out of its band. An optional
share of contour pixels (`contour_gap_rate`, off by default) can be drawn as weak gaps
below the contour band, through which the coarsest cutoff of the mask pipeline leaks.
"""

from dataclasses import dataclass, field
import logging
import math
import numpy as np
from scipy import ndimage
from src.boxmask.masks import BoundingBox, BoundaryStrengthMap, EIGHT_NEIGHBORS
from src.boxmask.soft_label import MAX_SOFT_CLASSES
from src.lib.core import Dims
from src.lib.raster_driver import quantize_strength, STRENGTH_LEVELS
from src.losses.labels import ImageLabel, PixelLabelMap
from src.lib.exceptions import InvalidSceneSpecError

SHAPES = ("disc", "square", "triangle", "ring")
BASE_COLORS = ((205, 60, 55), (60, 175, 70), (55, 85, 210), (215, 190, 45))
MIN_SCENE_SIZE = 16
BACKGROUND_DEPTH = -1

log = logging.getLogger(__name__)


def class_shape(class_id):
    return SHAPES[(class_id - 1) % len(SHAPES)]


def class_color(class_id):
    """Mean RGB of a class; classes past the base palette get rotated channels."""
    base = BASE_COLORS[(class_id - 1) % len(BASE_COLORS)]
    turn = (class_id - 1) // len(BASE_COLORS)
    rotated = base[turn % 3:] + base[:turn % 3]
    return tuple(min(255, c + 25 * (turn // 3)) for c in rotated)


def _check_range(name, bounds, low, high):
    lo, hi = bounds
    if not low <= lo <= hi <= high:
        raise InvalidSceneSpecError(f"{name} must satisfy {low} <= lo <= hi <= {high}, got {bounds}")


@dataclass(frozen=True)
class SceneSpec:
    """
    Parameters of the scene generator.

    Attributes:
        dims (Dims): Image size, at least 16x16.
        num_classes (int): Object class count C, at least 2.
        objects (tuple[int, int]): Inclusive range of objects per scene.
        overlap_probability (float): Chance that an object is placed against an earlier one.
        radius_fraction (tuple[float, float]): Object radius range as a fraction of min(h, w).
        color_jitter (int): Per-object offset range around the class colour.
        background_color (tuple[int, int, int]): Mean background RGB.
        texture_amplitude (float): Std of the per-pixel colour noise.
        contour_strength (tuple[float, float]): Strength range of true contours.
        contour_gap_rate (float): Share of contour pixels drawn as weak gaps.
        contour_gap_strength (tuple[float, float]): Strength range of the gaps.
        texture_strength (tuple[float, float]): Strength range of in-object texture edges.
        distractor_strength (tuple[float, float]): Strength range of background edges.
        texture_strokes (tuple[int, int]): Inclusive range of texture strokes per object.
        distractor_density (float): Background strokes per pixel.
        stroke_length (tuple[int, int]): Inclusive stroke length range in pixels.
    """
    dims: Dims = field(default_factory=lambda: Dims(48, 48))
    num_classes: int = 4
    objects: tuple = (1, 3)
    overlap_probability: float = 0.3
    radius_fraction: tuple = (0.125, 0.23)
    color_jitter: int = 20
    background_color: tuple = (120, 120, 120)
    texture_amplitude: float = 10.0
    contour_strength: tuple = (0.75, 1.0)
    contour_gap_rate: float = 0.0
    contour_gap_strength: tuple = (0.62, 0.72)
    texture_strength: tuple = (0.3, 0.55)
    distractor_strength: tuple = (0.05, 0.3)
    texture_strokes: tuple = (1, 2)
    distractor_density: float = 0.004
    stroke_length: tuple = (2, 4)

    def __post_init__(self):
        if self.dims.h < MIN_SCENE_SIZE or self.dims.w < MIN_SCENE_SIZE:
            raise InvalidSceneSpecError(
                f"Scenes must be at least {MIN_SCENE_SIZE}x{MIN_SCENE_SIZE}, got {self.dims.h}x{self.dims.w}")
        if not 2 <= self.num_classes <= MAX_SOFT_CLASSES:
            raise InvalidSceneSpecError(f"num_classes must lie in 2..{MAX_SOFT_CLASSES}, got {self.num_classes}")
        if not 0 <= self.overlap_probability <= 1:
            raise InvalidSceneSpecError(f"overlap_probability must lie in [0, 1], got {self.overlap_probability}")
        if not 0 <= self.contour_gap_rate <= 1:
            raise InvalidSceneSpecError(f"contour_gap_rate must lie in [0, 1], got {self.contour_gap_rate}")
        if not 0 <= self.distractor_density <= 1:
            raise InvalidSceneSpecError(f"distractor_density must lie in [0, 1], got {self.distractor_density}")
        if self.objects[0] < 1 or self.objects[0] > self.objects[1]:
            raise InvalidSceneSpecError(f"Invalid objects-per-scene range {self.objects}")
        _check_range("radius_fraction", self.radius_fraction, 0.05, 0.45)
        _check_range("contour_strength", self.contour_strength, 0.0, 1.0)
        _check_range("contour_gap_strength", self.contour_gap_strength, 0.0, 1.0)
        _check_range("texture_strength", self.texture_strength, 0.0, 1.0)
        _check_range("distractor_strength", self.distractor_strength, 0.0, 1.0)
        for name in ("contour_strength", "contour_gap_strength", "texture_strength", "distractor_strength"):
            low, high = band_levels(getattr(self, name))
            if low > high:
                raise InvalidSceneSpecError(f"{name} {getattr(self, name)} holds no 8-bit strength level")
        _check_range("texture_strokes", self.texture_strokes, 0, 16)
        _check_range("stroke_length", self.stroke_length, 1, 16)
        if self.radius_range[0] < 2:
            raise InvalidSceneSpecError(f"Object radii would fall below 2 px in a {self.dims.h}x{self.dims.w} scene")

    @property
    def radius_range(self):
        side = min(self.dims.h, self.dims.w)
        return (int(round(self.radius_fraction[0] * side)), int(round(self.radius_fraction[1] * side)))

    def to_dict(self):
        return {
            "height": self.dims.h,
            "width": self.dims.w,
            "num_classes": self.num_classes,
            "objects": list(self.objects),
            "overlap_probability": self.overlap_probability,
            "radius_fraction": list(self.radius_fraction),
            "color_jitter": self.color_jitter,
            "background_color": list(self.background_color),
            "texture_amplitude": self.texture_amplitude,
            "contour_strength": list(self.contour_strength),
            "contour_gap_rate": self.contour_gap_rate,
            "contour_gap_strength": list(self.contour_gap_strength),
            "texture_strength": list(self.texture_strength),
            "distractor_strength": list(self.distractor_strength),
            "texture_strokes": list(self.texture_strokes),
            "distractor_density": self.distractor_density,
            "stroke_length": list(self.stroke_length),
        }


@dataclass(frozen=True)
class SceneObject:
    class_id: int
    cx: int
    cy: int
    radius: int

    @property
    def shape(self):
        return class_shape(self.class_id)

    def mask(self, dims):
        """Full (pre-occlusion) extent as an (h, w) bool grid."""
        yy, xx = np.mgrid[0:dims.h, 0:dims.w]
        dx, dy, r = xx - self.cx, yy - self.cy, self.radius
        if self.shape == "disc":
            return dx ** 2 + dy ** 2 <= r ** 2
        if self.shape == "square":
            half = int(0.85 * r)
            return (np.abs(dx) <= half) & (np.abs(dy) <= half)
        if self.shape == "triangle":
            # apex at the top, base on row cy + r
            return (dy >= -r) & (dy <= r) & (2 * np.abs(dx) <= dy + r)
        hole = (dx - 0.5 * r) ** 2 + dy ** 2 <= (0.3 * r) ** 2
        return (dx ** 2 + dy ** 2 <= r ** 2) & ~hole


@dataclass
class Scene:
    """
    One generated image with its ground truth.

    Attributes:
        image (np.ndarray): uint8 RGB grid (h, w, 3).
        pixels (PixelLabelMap): Visible class per pixel.
        instances (np.ndarray): Depth of the visible object per pixel, -1 for background.
        boxes (list[BoundingBox]): Boxes of the objects with visible pixels.
        box_instances (list[int]): Depth of the object behind each box.
        image_label (ImageLabel): Presence vector.
        strength (BoundaryStrengthMap): Quantized boundary strengths.
    """
    image: np.ndarray
    pixels: PixelLabelMap
    instances: np.ndarray
    boxes: list
    box_instances: list
    image_label: ImageLabel
    strength: BoundaryStrengthMap

    def object_region(self, k):
        """Visible pixels of the object behind box k."""
        return self.instances == self.box_instances[k]


def _place(spec, rng, placed, radius):
    h, w = spec.dims.shape
    if placed and rng.random() < spec.overlap_probability:
        anchor = placed[rng.integers(len(placed))]
        angle = rng.uniform(0.0, 2.0 * np.pi)
        distance = rng.uniform(0.7, 0.95) * (anchor.radius + radius)
        cx = anchor.cx + distance * np.cos(angle)
        cy = anchor.cy + distance * np.sin(angle)
    else:
        cx = rng.uniform(radius, w - 1 - radius)
        cy = rng.uniform(radius, h - 1 - radius)
    cx = int(np.clip(np.rint(cx), radius, w - 1 - radius))
    cy = int(np.clip(np.rint(cy), radius, h - 1 - radius))
    return cx, cy


def _stroke(rng, dims, length_range, origin=None):
    """Pixels of a short straight stroke from `origin` (y, x), random when omitted."""
    length = int(rng.integers(length_range[0], length_range[1] + 1))
    if origin is None:
        origin = (rng.uniform(0, dims.h - 1), rng.uniform(0, dims.w - 1))
    y0, x0 = origin
    angle = rng.uniform(0.0, np.pi)
    steps = np.linspace(0.0, length - 1, 2 * length)
    xs = np.clip(np.rint(x0 + steps * np.cos(angle)), 0, dims.w - 1).astype(int)
    ys = np.clip(np.rint(y0 + steps * np.sin(angle)), 0, dims.h - 1).astype(int)
    stroke = np.zeros(dims.shape, dtype=bool)
    stroke[ys, xs] = True
    return stroke


def contour_pixels(instances):
    """
    Pixels with a 4-neighbour of greater depth. Contours therefore lie on the
    lower (occluded or background) side of every visible boundary.
    """
    padded = np.pad(instances, 1, constant_values=BACKGROUND_DEPTH)
    centre = padded[1:-1, 1:-1]
    contour = np.zeros(instances.shape, dtype=bool)
    for neighbour in (padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]):
        contour |= neighbour > centre
    return contour


def band_levels(band):
    """Inclusive range of 8-bit codes whose strengths lie inside band."""
    low, high = band
    return math.ceil(low * STRENGTH_LEVELS - 1e-9), math.floor(high * STRENGTH_LEVELS + 1e-9)


def _draw(rng, band, size=None):
    low, high = band_levels(band)
    return rng.integers(low, high + 1, size=size) / STRENGTH_LEVELS


def _strength_map(spec, rng, instances, objects):
    dims = spec.dims
    contour = contour_pixels(instances)
    gaps = contour & (rng.random(dims.shape) < spec.contour_gap_rate)
    contours = np.where(contour, _draw(rng, spec.contour_strength, dims.shape), 0.0)
    contours = np.where(gaps, _draw(rng, spec.contour_gap_strength, dims.shape), contours)

    texture = np.zeros(dims.shape)
    for depth, obj in enumerate(objects):
        core = ndimage.binary_erosion((instances == depth) & ~contour, structure=EIGHT_NEIGHBORS)
        if not core.any():
            continue
        ys, xs = np.nonzero(core)
        for _ in range(int(rng.integers(spec.texture_strokes[0], spec.texture_strokes[1] + 1))):
            k = rng.integers(len(ys))
            stroke = _stroke(rng, dims, spec.stroke_length, origin=(ys[k], xs[k])) & core
            texture = np.maximum(texture, np.where(stroke, _draw(rng, spec.texture_strength), 0.0))

    distractors = np.zeros(dims.shape)
    background = (instances == BACKGROUND_DEPTH) & ~contour
    for _ in range(int(round(spec.distractor_density * dims.size))):
        stroke = _stroke(rng, dims, spec.stroke_length) & background
        distractors = np.maximum(distractors, np.where(stroke, _draw(rng, spec.distractor_strength), 0.0))

    return quantize_strength(np.maximum(contours, np.maximum(texture, distractors)))


def gen_scene(spec, rng):
    """
    Generates one scene.

    Args:
        spec (SceneSpec): Generator parameters.
        rng (np.random.Generator): Source of randomness; equal generator states give
            identical scenes.

    Returns:
        Scene: Image, ground truth and boundary strengths.
    """
    dims = spec.dims
    r_min, r_max = spec.radius_range
    objects = []
    for _ in range(int(rng.integers(spec.objects[0], spec.objects[1] + 1))):
        class_id = int(rng.integers(1, spec.num_classes + 1))
        radius = int(rng.integers(r_min, r_max + 1))
        cx, cy = _place(spec, rng, objects, radius)
        objects.append(SceneObject(class_id, cx, cy, radius))

    noise = rng.normal(0.0, spec.texture_amplitude, size=dims.shape + (3,))
    image = np.empty(dims.shape + (3,))
    image[:] = spec.background_color
    instances = np.full(dims.shape, BACKGROUND_DEPTH, dtype=np.int64)
    labels = np.zeros(dims.shape, dtype=np.int64)
    extents = []
    for depth, obj in enumerate(objects):
        extent = obj.mask(dims)
        color = np.asarray(class_color(obj.class_id)) + rng.integers(-spec.color_jitter, spec.color_jitter + 1, 3)
        image[extent] = color
        instances[extent] = depth
        labels[extent] = obj.class_id
        extents.append(extent)
    image = np.clip(np.rint(image + noise), 0, 255).astype(np.uint8)

    boxes, box_instances = [], []
    for depth, (obj, extent) in enumerate(zip(objects, extents)):
        if not (instances == depth).any():
            log.debug("Object %d (%s) fully occluded, no box", depth, obj.shape)
            continue
        ys, xs = np.nonzero(extent)
        boxes.append(BoundingBox(obj.class_id, xs.min(), ys.min(), xs.max(), ys.max()))
        box_instances.append(depth)

    pixels = PixelLabelMap.from_grid(labels)
    strength = _strength_map(spec, rng, instances, objects)
    return Scene(
        image=image,
        pixels=pixels,
        instances=instances,
        boxes=boxes,
        box_instances=box_instances,
        image_label=ImageLabel.from_pixel_labels(pixels, spec.num_classes),
        strength=BoundaryStrengthMap(dims, strength),
    )


def scene_rng(seed, index):
    """Generator of scene `index` in a dataset seeded with `seed`."""
    return np.random.default_rng([seed, index])
