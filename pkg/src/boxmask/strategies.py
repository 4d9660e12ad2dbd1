"""
Pseudo-label strategies for box-annotated images.

This module defines a `BaseStrategy` class and the three strategies that turn a
sample's boxes into box-branch supervision:

- `ucm`: boundary-guided soft segmentation (confident, uncertain and overlap pixels).
- `rawbox`: whole box interiors, overlaps kept soft.
- `hardseg`: the `ucm` masks with every overlap region collapsed to one random class.

The GrabCut and MCG baselines need external segmentation algorithms and are not
available. Asking for them raises `UnimplementedBaselineError`.

Example Usage:
    strategy = BaseStrategy.get_strategy("ucm")(BoxMaskConfig())
    label = strategy.label(boxes, ucm, dims, classes)
"""

import logging
from src.boxmask.masks import BoxMaskConfig, box_to_mask, merge_masks, raw_box_label, harden
from src.lib.exceptions import StrategyNotFoundError, UnimplementedBaselineError, InvalidStrengthMapError

UNIMPLEMENTED_BASELINES = ("grabcut", "mcg")


class BaseStrategy():
    """
    A base class for box-level pseudo-label strategies.

    Attributes:
        log (logging.Logger): Logger instance for debugging and error logging.
        cfg (BoxMaskConfig): Alpha and thresholds of the mask pipeline.
        seed (int): Seed for strategies that randomize.
        output_kind (str): "soft" for `SoftSegLabel` output, "hard" for `PixelLabelMap`.
        needs_strength (bool): Whether a boundary-strength map is required.
    """
    output_kind = "soft"
    needs_strength = True

    def __init__(self, cfg=None, seed=0):
        """
        Args:
            cfg (BoxMaskConfig, optional): Pipeline parameters, defaults to alpha=30 and
                thresholds {1/4, 1/2, 3/4}.
            seed (int): Base seed for randomized strategies.
        """
        self.log = logging.getLogger(__name__)
        self.cfg = cfg or BoxMaskConfig()
        self.seed = seed

    @property
    def name(self):
        return type(self).__name__.replace("Strategy", "").lower()

    def label(self, boxes, ucm, dims, classes, key=0):
        """
        Builds the box-branch label of one image.

        Args:
            boxes (list[BoundingBox]): The image's boxes.
            ucm (BoundaryStrengthMap | None): Boundary strengths, if the strategy needs them.
            dims (Dims): Image size.
            classes (ClassConfig): Class configuration.
            key (int): Per-image key mixed into the seed of randomized strategies.

        Raises:
            NotImplementedError: Subclasses must implement the `label` method.
        """
        raise NotImplementedError(
            "Subclasses must implement the label() method")

    def _object_masks(self, boxes, ucm, dims):
        if ucm is None:
            raise InvalidStrengthMapError(f"Strategy '{self.name}' needs a boundary-strength map")
        return [box_to_mask(ucm, box.validate(dims), self.cfg) for box in boxes]

    @classmethod
    def get_strategy(cls, strategy_name):
        """
        Returns the strategy class registered under the given name.

        Raises:
            UnimplementedBaselineError: For "grabcut" and "mcg".
            StrategyNotFoundError: If the name is not recognized.
        """
        if strategy_name.lower() in UNIMPLEMENTED_BASELINES:
            raise UnimplementedBaselineError(
                f"'{strategy_name}' is an unimplemented baseline: it needs an external "
                "segmentation algorithm")
        strategies = {sub.__name__.replace(
            "Strategy", "").lower(): sub for sub in cls.__subclasses__()}

        try:
            return strategies[strategy_name.lower()]
        except KeyError as e:
            raise StrategyNotFoundError(
                f"ERROR: Strategy '{strategy_name}' not recognized!") from e

    @classmethod
    def names(cls):
        """Names of the available strategies, sorted."""
        return sorted(sub.__name__.replace("Strategy", "").lower() for sub in cls.__subclasses__())


class UcmStrategy(BaseStrategy):
    """
    Boundary-guided soft segmentation from a UCM-style strength map.
    """

    def label(self, boxes, ucm, dims, classes, key=0):
        masks = self._object_masks(boxes, ucm, dims)
        return merge_masks(masks, dims, classes)


class RawboxStrategy(BaseStrategy):
    """
    Every pixel of a box gets the box's class, no refinement.
    """
    needs_strength = False

    def label(self, boxes, ucm, dims, classes, key=0):
        return raw_box_label([box.validate(dims) for box in boxes], dims, classes)


class HardsegStrategy(BaseStrategy):
    """
    The soft segmentation with each overlap region resolved to one random class.
    """
    output_kind = "hard"

    def label(self, boxes, ucm, dims, classes, key=0):
        soft = merge_masks(self._object_masks(boxes, ucm, dims), dims, classes)
        return harden(soft, seed=(self.seed, key), ignore_value=classes.ignore_value)
