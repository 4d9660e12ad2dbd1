"""
Materializes box-branch labels for a dataset directory.

`make_masks` runs one pseudo-label strategy over every box-annotated training sample,
writes the labels under masks/<strategy>/, points the manifest records at them and
records the strategy parameters together with a mask calibration in dataset.json.

Example Usage:
    make_masks("data/synth", "ucm", alpha=30.0, seed=0)
"""

import logging
from src.boxmask.masks import BoundaryStrengthMap, BoxMaskConfig, DEFAULT_THRESHOLDS
from src.boxmask.strategies import BaseStrategy
from src.experiments.mask_quality import MaskedObject, calibration
from src.lib.core import ClassConfig, Dims
from src.storage.dataset_layout import DatasetLayout, dump_json
from src.trainer.samples import TRAIN

log = logging.getLogger(__name__)


def masked_objects(layout, records=None, boxes=None):
    """
    Yields every training box that has a strength map and a ground-truth instance.

    Args:
        layout (DatasetLayout): Dataset directory.
        records (list[ManifestRecord], optional): Manifest records, read when omitted.
        boxes (dict, optional): Boxes per sample id, read when omitted.
    """
    records = records if records is not None else layout.read_manifest()
    boxes = boxes if boxes is not None else layout.read_boxes()
    for record in records:
        if record.split != TRAIN or record.strength is None or record.id not in boxes:
            continue
        instances = layout.read_instances(record)
        if instances is None:
            continue
        strength = layout.rasters.read_strength(layout.path(record.strength))
        ucm = BoundaryStrengthMap(Dims(*strength.shape), strength)
        for box, instance in boxes[record.id]:
            if instance is not None:
                yield MaskedObject(ucm, box, instances == instance)


def make_masks(data_dir, strategy, alpha, seed, thresholds=DEFAULT_THRESHOLDS):
    """
    Writes the labels of one strategy for every box-annotated training sample.

    The per-image seed key of randomized strategies is the sample's manifest position,
    the same key the trainer uses when it computes labels on the fly.

    Args:
        data_dir (str): Dataset directory.
        strategy (str): Strategy name, e.g. "ucm", "rawbox" or "hardseg".
        alpha (float): Confident-mask area threshold, in percent of the box.
        seed (int): Base seed of randomized strategies.
        thresholds (tuple[float]): Strength cutoffs, fine to coarse.

    Returns:
        dict: The record stored under mask_strategies[strategy] in dataset.json.

    Raises:
        UnimplementedBaselineError: For "grabcut" and "mcg".
        StrategyNotFoundError: For any other unknown name.
        ManifestError, StorageError: If the directory is unreadable or unwritable.
    """
    cfg = BoxMaskConfig(alpha_percent=alpha, thresholds=thresholds)
    labeler = BaseStrategy.get_strategy(strategy)(cfg, seed=seed)
    layout = DatasetLayout(data_dir)
    metadata = layout.read_metadata()
    classes = ClassConfig(int(metadata["num_classes"]))
    records = layout.read_manifest()
    boxes = layout.read_boxes()

    written = 0
    for position, record in enumerate(records):
        if record.split != TRAIN or record.id not in boxes:
            continue
        dims = Dims(int(metadata["height"]), int(metadata["width"]))
        ucm = None
        if labeler.needs_strength and record.strength is not None:
            strength = layout.rasters.read_strength(layout.path(record.strength))
            dims = Dims(*strength.shape)
            ucm = BoundaryStrengthMap(dims, strength)
        label = labeler.label([box for box, _ in boxes[record.id]], ucm, dims, classes, key=position)
        record.soft_labels[labeler.name] = layout.write_box_label(
            labeler.name, record.id, label, classes.num_object_classes)
        written += 1
        log.debug("Sample %s: %s label written", record.id, labeler.name)

    summary = {
        "alpha": cfg.alpha_percent,
        "thresholds": list(cfg.thresholds),
        "seed": seed,
        "samples": written,
    }
    if labeler.needs_strength:
        summary["calibration"] = calibration(masked_objects(layout, records, boxes), cfg)
    else:
        summary["calibration"] = calibration(masked_objects(layout, records, boxes), cfg, use_strength=False)

    layout.write_manifest(records)
    metadata.setdefault("mask_strategies", {})[labeler.name] = summary
    layout.write_metadata(metadata)
    log.info("Strategy %s: %d labels written to %s, calibration %s",
             labeler.name, written, data_dir, dump_json(summary["calibration"]))
    return summary
