"""
Dataset splitting into pixel-, box- and image-supervised subsets, and the per-step
sample draw.

Split sizes for n ids and ratio p:b:i (t = p + b + i):

    u = n // t                      base unit
    pixel = p*u, box = b*u, image = i*u
    r = n - t*u                     leftover
    if (p + b) divides r: pixel += p*k, box += b*k with k = r / (p + b)
    else:                 image += r

This reproduces the published splits of 10,582 images: 3527/3527/3528 at 1:1:1,
1763/3526/5293 at 1:2:3 and 662/3310/6610 at 1:5:10.

Ablation variants keep a subset of the branches. "p" trains on the pixel subset only,
"p+i" and "p+b" drop one weak subset, "p+b+i" keeps all three. Every variant has an
upper-bound twin ("p+b_ub", ...) that trains the same ids with pixel ground truth.

Example Usage:
    split = split_dataset(ids, Ratio.parse("1:5:10"), seed=0)
    sample_id, branch = next_sample(split, rng)
"""

from dataclasses import dataclass
import logging
import numpy as np
from src.losses.branches import BRANCH_ORDER
from src.lib.exceptions import (
    InvalidRatioError,
    InvalidTrainConfigError,
    TooFewSamplesError,
    UnknownVariantError,
)

VARIANTS = ("p", "p+i", "p+b", "p+b+i")
UPPER_BOUND_SUFFIX = "_ub"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ratio:
    """
    Subset ratio p:b:i. Parts are non-negative integers with a positive sum.
    """
    pixel: int
    box: int
    image: int

    def __post_init__(self):
        parts = (self.pixel, self.box, self.image)
        if any(int(part) != part or part < 0 for part in parts) or sum(parts) < 1:
            raise InvalidRatioError(f"Ratio parts must be non-negative integers with a positive sum, got {parts}")

    @classmethod
    def parse(cls, text):
        """
        Parses "p:b:i".

        Raises:
            InvalidRatioError: On anything but three colon-separated integers.
        """
        if isinstance(text, cls):
            return text
        try:
            parts = [int(part) for part in str(text).strip().split(":")]
        except ValueError as e:
            raise InvalidRatioError(f"Cannot parse ratio '{text}', expected P:B:I") from e
        if len(parts) != 3:
            raise InvalidRatioError(f"Cannot parse ratio '{text}', expected P:B:I")
        return cls(*parts)

    @property
    def total(self):
        return self.pixel + self.box + self.image

    def __str__(self):
        return f"{self.pixel}:{self.box}:{self.image}"


@dataclass(frozen=True)
class DatasetSplit:
    """
    Disjoint subsets S_pixel, S_box and S_image of training ids.
    """
    pixel_set: tuple
    box_set: tuple
    image_set: tuple
    ratio: Ratio

    def __post_init__(self):
        for name in ("pixel_set", "box_set", "image_set"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        members = self.pixel_set + self.box_set + self.image_set
        if len(set(members)) != len(members):
            raise InvalidTrainConfigError("Split subsets must be pairwise disjoint")

    def subsets(self):
        """Branch tag to ids, in the fixed order pixel, box, image."""
        return dict(zip(BRANCH_ORDER, (self.pixel_set, self.box_set, self.image_set)))

    def sizes(self):
        return tuple(len(ids) for ids in self.subsets().values())

    def union(self):
        return self.pixel_set + self.box_set + self.image_set

    def branch_of(self, sample_id):
        for tag, ids in self.subsets().items():
            if sample_id in ids:
                return tag
        raise KeyError(sample_id)


def split_sizes(n, ratio):
    """
    Subset sizes for n ids under the leftover rule in the module docstring.

    Raises:
        TooFewSamplesError: If n is smaller than p + b + i.
    """
    if n < ratio.total:
        raise TooFewSamplesError(f"{n} samples cannot be split by ratio {ratio}")
    unit = n // ratio.total
    sizes = [ratio.pixel * unit, ratio.box * unit, ratio.image * unit]
    leftover = n - ratio.total * unit
    strong = ratio.pixel + ratio.box
    if strong and leftover % strong == 0:
        extra = leftover // strong
        sizes[0] += ratio.pixel * extra
        sizes[1] += ratio.box * extra
    else:
        sizes[2] += leftover
    return tuple(sizes)


def split_dataset(ids, ratio, seed):
    """
    Shuffles ids with a seeded generator and cuts them into contiguous subsets.

    Args:
        ids (list[str]): Training sample ids.
        ratio (Ratio | str): Subset ratio.
        seed (int): Shuffle seed.

    Returns:
        DatasetSplit: Every id assigned exactly once.
    """
    ratio = Ratio.parse(ratio)
    ids = list(ids)
    n_pixel, n_box, _ = split_sizes(len(ids), ratio)
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[k] for k in order]
    split = DatasetSplit(shuffled[:n_pixel], shuffled[n_pixel:n_pixel + n_box],
                         shuffled[n_pixel + n_box:], ratio)
    log.info("Split %d ids by %s into %s", len(ids), ratio, split.sizes())
    return split


def parse_variant(variant):
    """
    Splits a variant name into its base and the upper-bound flag.

    Raises:
        UnknownVariantError: If the base is not one of p, p+i, p+b, p+b+i.
    """
    name = str(variant).strip().lower()
    upper = name.endswith(UPPER_BOUND_SUFFIX)
    base = name[:-len(UPPER_BOUND_SUFFIX)] if upper else name
    if base not in VARIANTS:
        raise UnknownVariantError(
            f"Variant '{variant}' not recognized, expected one of {', '.join(VARIANTS)} "
            f"optionally with '{UPPER_BOUND_SUFFIX}'")
    return base, upper


def variant_branches(variant):
    """
    Branches a variant trains, in `BRANCH_ORDER`. Upper-bound variants train the pixel
    branch only.
    """
    base, upper = parse_variant(variant)
    if upper:
        return ("pixel",)
    parts = base.split("+")
    return tuple(name for name, tag in (("pixel", "p"), ("box", "b"), ("image", "i")) if tag in parts)


def apply_variant(split, variant):
    """
    Restricts a split to the branches a variant trains.

    The weak subsets a variant does not use are emptied. Upper-bound variants move the
    kept weak subsets into the pixel subset, so the same ids train with pixel ground truth.
    """
    base, upper = parse_variant(variant)
    box = split.box_set if "b" in base.split("+") else ()
    image = split.image_set if "i" in base.split("+") else ()
    if upper:
        return DatasetSplit(split.pixel_set + box + image, (), (), split.ratio)
    return DatasetSplit(split.pixel_set, box, image, split.ratio)


def next_sample(split, rng):
    """
    Draws one sample uniformly from the union of the three subsets.

    Returns:
        tuple[str, str]: The sample id and the tag of the subset that owns it.

    Raises:
        TooFewSamplesError: If every subset is empty.
    """
    sizes = split.sizes()
    total = sum(sizes)
    if total == 0:
        raise TooFewSamplesError("Cannot draw from an empty split")
    k = int(rng.integers(total))
    tag = BRANCH_ORDER[int(np.searchsorted(np.cumsum(sizes), k, side="right"))]
    return split.union()[k], tag
