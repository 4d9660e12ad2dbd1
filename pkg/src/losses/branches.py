"""
Branch classes of the annotation-specific loss module.

A training sample is routed to the branch matching its supervision (image-level,
box-level or pixel-level). Each branch wraps one loss function and counts how often it
was activated, which lets the trainer check that exactly one branch works per step.

Example Usage:
    branch = BaseBranch.get_branch("box")()
    result = branch.compute(feature_map, soft_label)
"""

import logging
from src.boxmask.soft_label import SoftSegLabel
from src.losses.functional import image_loss, box_loss, pixel_loss
from src.losses.labels import ImageLabel, PixelLabelMap
from src.lib.exceptions import BranchNotFoundError, LabelTypeError

BRANCH_ORDER = ("pixel", "box", "image")


class BaseBranch():
    """
    A base class for loss branches.

    Attributes:
        log (logging.Logger): Logger instance for debugging and error logging.
        activations (int): Number of `compute` calls so far.
        loss_total (float): Sum of the loss values returned so far.
    """

    def __init__(self):
        self.log = logging.getLogger(__name__)
        self.activations = 0
        self.loss_total = 0.0

    @property
    def name(self):
        return type(self).__name__.replace("Branch", "").lower()

    def compute(self, f, label):
        """
        Evaluates the branch loss and counts the activation.

        Returns:
            LossResult: Loss value and gradient with respect to f.
        """
        self.activations += 1
        result = self._loss(f, label)
        self.loss_total += result.value
        self.log.debug("%s branch loss %.6f", self.name, result.value)
        return result

    def _loss(self, f, label):
        """
        Raises:
            NotImplementedError: Subclasses must implement the `_loss` method.
        """
        raise NotImplementedError(
            "Subclasses must implement the _loss() method")

    @classmethod
    def get_branch(cls, branch_name):
        """
        Returns the branch class registered under the given name.

        Raises:
            BranchNotFoundError: If the name is not one of "image", "box" or "pixel".
        """
        branches = {sub.__name__.replace(
            "Branch", "").lower(): sub for sub in cls.__subclasses__()}

        try:
            return branches[branch_name.lower()]
        except KeyError as e:
            raise BranchNotFoundError(
                f"ERROR: Branch '{branch_name}' not recognized!") from e


class ImageBranch(BaseBranch):
    """
    Image-level labels: pooled binary cross-entropy.
    """

    def _loss(self, f, label):
        if not isinstance(label, ImageLabel):
            raise LabelTypeError(f"Image branch expects an ImageLabel, got {type(label).__name__}")
        return image_loss(f, label)


class BoxBranch(BaseBranch):
    """
    Box-level labels: soft cross-entropy. Hard pseudo-labels (the hard segmentation
    strategy) are accepted as singleton soft labels with ignored pixels uncertain.
    """

    def _loss(self, f, label):
        if isinstance(label, PixelLabelMap):
            label = SoftSegLabel.from_pixel_labels(label)
        if not isinstance(label, SoftSegLabel):
            raise LabelTypeError(f"Box branch expects a SoftSegLabel, got {type(label).__name__}")
        return box_loss(f, label)


class PixelBranch(BaseBranch):
    """
    Pixel-level labels: softmax cross-entropy with ignore value.
    """

    def _loss(self, f, label):
        if not isinstance(label, PixelLabelMap):
            raise LabelTypeError(f"Pixel branch expects a PixelLabelMap, got {type(label).__name__}")
        return pixel_loss(f, label)
