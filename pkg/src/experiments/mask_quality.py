"""
Quality of box-derived object masks against ground truth.

An object here is a triple (strength map, box, visible region). Two scores are kept per
object:

- plain IoU between the confident mask of the box and the object's visible pixels;
- decided IoU, the same ratio taken over the pixels the box loss actually counts, i.e.
  with the mask's uncertain pixels left out of both sets. A single threshold never
  produces uncertain pixels, so for it both scores coincide.

Functions:
    object_iou: IoU of two boolean grids, optionally over a subset of pixels.
    object_masks: Full-image confident and uncertain masks of one box.
    calibration: Mean IoU, share of objects at IoU >= 0.7 and fallback count.
    threshold_study: Mean plain IoU per threshold set (1/4, 1/2, 3/4 alone and all three),
        with decided IoU beside it.
"""

from dataclasses import dataclass
import logging
import numpy as np
from src.boxmask.masks import BoxMaskConfig, box_to_mask, DEFAULT_THRESHOLDS

GOOD_IOU = 0.7
THRESHOLD_COLUMNS = {
    "1/4": (0.25,),
    "1/2": (0.5,),
    "3/4": (0.75,),
    "all": DEFAULT_THRESHOLDS,
}

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaskedObject:
    """
    Attributes:
        strength (BoundaryStrengthMap): Strength map of the object's image.
        box (BoundingBox): The object's box.
        region (np.ndarray): Visible pixels of the object, an (h, w) bool grid.
    """
    strength: object
    box: object
    region: np.ndarray


def object_iou(mask, truth, counted=None):
    """
    IoU of two bool grids. With `counted`, only those pixels take part. Two empty sets
    score 1.
    """
    if counted is not None:
        mask, truth = mask & counted, truth & counted
    union = np.logical_or(mask, truth).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(mask, truth).sum() / union)


def object_masks(obj, cfg):
    """
    Returns:
        tuple[np.ndarray, np.ndarray, bool]: Full-image confident and uncertain grids and
        the fallback flag.
    """
    mask = box_to_mask(obj.strength, obj.box, cfg)
    confident, uncertain = mask.full_image(obj.strength.dims)
    return confident, uncertain, mask.fallback


def box_interior(obj):
    interior = np.zeros(obj.region.shape, dtype=bool)
    interior[obj.box.slices] = True
    return interior


def calibration(objects, cfg=None, use_strength=True):
    """
    Summarizes mask quality over objects.

    Args:
        objects (Iterable[MaskedObject]): Objects to score.
        cfg (BoxMaskConfig, optional): Pipeline parameters.
        use_strength (bool): False scores whole box interiors instead of confident masks.

    Returns:
        dict: objects, mean_iou, mean_decided_iou, good_share (plain IoU >= 0.7) and
        fallbacks. Means are None when there are no objects.
    """
    cfg = cfg or BoxMaskConfig()
    ious, decided, fallbacks = [], [], 0
    for obj in objects:
        if use_strength:
            mask, uncertain, fallback = object_masks(obj, cfg)
            fallbacks += int(fallback)
        else:
            mask, uncertain = box_interior(obj), np.zeros(obj.region.shape, dtype=bool)
        ious.append(object_iou(mask, obj.region))
        decided.append(object_iou(mask, obj.region, ~uncertain))
    if not ious:
        return {"objects": 0, "mean_iou": None, "mean_decided_iou": None, "good_share": None, "fallbacks": 0}
    summary = {
        "objects": len(ious),
        "mean_iou": float(np.mean(ious)),
        "mean_decided_iou": float(np.mean(decided)),
        "good_share": float(np.mean(np.asarray(ious) >= GOOD_IOU)),
        "fallbacks": fallbacks,
    }
    log.info("Mask calibration over %d objects: mean IoU %.4f, %d fallbacks",
             summary["objects"], summary["mean_iou"], fallbacks)
    return summary


def threshold_study(objects, alpha_percent=30.0):
    """
    Mean per-object mask IoU for each single threshold and for all three together.

    The columns hold plain IoU of the confident masks. The "decided" entry repeats the
    columns with decided IoU.

    Returns:
        dict: One entry per column of `THRESHOLD_COLUMNS` plus "decided", a dict with the
        same keys. Values are None without objects.
    """
    objects = list(objects)
    study, decided = {}, {}
    for column, thresholds in THRESHOLD_COLUMNS.items():
        cfg = BoxMaskConfig(alpha_percent=alpha_percent, thresholds=thresholds)
        summary = calibration(objects, cfg)
        study[column] = summary["mean_iou"]
        decided[column] = summary["mean_decided_iou"]
    study["decided"] = decided
    return study
