"""
Dataset-level evaluation: predict every image of a split, sum one global confusion
matrix and report the four metrics with per-class IU.
"""

import logging
from src.metrics.confusion import ConfusionMatrix, accumulate, compute_metrics
from src.toynet.network import predict, to_network_input
from src.trainer.samples import VAL
from src.lib.exceptions import MissingLabelArtifactError

log = logging.getLogger(__name__)


def confusion_for(params, samples, channels):
    """
    Global confusion matrix of `params` over `samples`.

    Raises:
        MissingLabelArtifactError: If a sample has no pixel ground truth.
    """
    cm = ConfusionMatrix.empty(channels)
    for sample in samples:
        if sample.pixels is None:
            raise MissingLabelArtifactError(f"Sample '{sample.id}' has no pixel ground truth to evaluate against")
        cm = accumulate(cm, predict(params, to_network_input(sample.image)), sample.pixels)
    return cm


def evaluate(params, dataset, split=VAL):
    """
    Evaluates a model on one split of a dataset.

    Args:
        params (NetParams): Trained parameters.
        dataset (Dataset): Samples with pixel ground truth.
        split (str): "val" (default) or "train".

    Returns:
        dict: pAcc, mAcc, mIU, fwIU and per_class_iu.

    Raises:
        EmptyValidationSetError: If the split has no samples.
    """
    samples = dataset.split_samples(split)
    report = compute_metrics(confusion_for(params, samples, dataset.classes.channels))
    log.info("Evaluated %d %s images: mIU %.4f pAcc %.4f", len(samples), split, report["mIU"], report["pAcc"])
    return report
