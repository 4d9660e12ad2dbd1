"""
In-memory training data.

A `Dataset` is what the trainer and the evaluator read. It is filled either by the
dataset reader in `src.storage.dataset_layout` or directly from generated scenes in
tests. Optional label artifacts are None when a sample does not carry them.

Classes:
    Sample: One image and the label artifacts it carries.
    Dataset: Samples in manifest order plus the class configuration.
"""

from dataclasses import dataclass, field
import numpy as np
from src.lib.core import Dims
from src.lib.exceptions import ManifestError, EmptyValidationSetError

TRAIN = "train"
VAL = "val"


@dataclass
class Sample:
    """
    Attributes:
        id (str): Unique sample id.
        image (np.ndarray): 8-bit RGB grid of shape (h, w, 3).
        split (str): "train" or "val".
        pixels (PixelLabelMap | None): Pixel-level ground truth.
        boxes (list[BoundingBox] | None): Box annotations.
        image_label (ImageLabel | None): Presence vector.
        strength (BoundaryStrengthMap | None): Boundary-strength map.
        box_label (SoftSegLabel | PixelLabelMap | None): Precomputed box-branch label.
    """
    id: str
    image: np.ndarray
    split: str = TRAIN
    pixels: object = None
    boxes: list = None
    image_label: object = None
    strength: object = None
    box_label: object = None

    @property
    def dims(self):
        return Dims(*self.image.shape[:2])


@dataclass
class Dataset:
    """
    Attributes:
        classes (ClassConfig): Class count and ignore value.
        samples (list[Sample]): Samples in manifest order; ids must be unique.
        box_strategy (str | None): Strategy whose labels fill `Sample.box_label`.
    """
    classes: object
    samples: list = field(default_factory=list)
    box_strategy: str = None

    def __post_init__(self):
        self._index = {}
        for position, sample in enumerate(self.samples):
            if sample.id in self._index:
                raise ManifestError(f"Duplicate sample id '{sample.id}'")
            self._index[sample.id] = position

    def get(self, sample_id):
        try:
            return self.samples[self._index[sample_id]]
        except KeyError as e:
            raise ManifestError(f"Unknown sample id '{sample_id}'") from e

    def position(self, sample_id):
        """Manifest position of a sample, used as its per-image seed key."""
        return self._index[sample_id]

    def ids(self, split=TRAIN):
        return [s.id for s in self.samples if s.split == split]

    def split_samples(self, split=VAL):
        """
        Samples of one split, in manifest order.

        Raises:
            EmptyValidationSetError: If the split has no samples.
        """
        samples = [s for s in self.samples if s.split == split]
        if not samples:
            raise EmptyValidationSetError(f"Dataset has no '{split}' samples")
        return samples
