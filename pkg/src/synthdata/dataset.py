"""
Writes a synthetic dataset directory.

Scene k (training scenes first, then validation scenes) is generated from its own
generator `default_rng([seed, k])`, so any scene can be regenerated alone and the whole
tree is byte-identical for equal arguments.
"""

import logging
from src.storage.dataset_layout import DatasetLayout, ManifestRecord, FORMAT_VERSION
from src.synthdata.scenes import gen_scene, scene_rng
from src.trainer.samples import TRAIN, VAL
from src.lib.exceptions import InvalidSceneSpecError

log = logging.getLogger(__name__)


def sample_id(index):
    return f"{index:06d}"


def gen_dataset(spec, n_train, n_val, seed, out_dir):
    """
    Generates and writes n_train + n_val scenes.

    Args:
        spec (SceneSpec): Generator parameters.
        n_train (int): Training scenes, at least 1.
        n_val (int): Validation scenes, at least 1.
        seed (int): Dataset seed.
        out_dir (str): Target directory, created when missing.

    Returns:
        DatasetLayout: The written directory.

    Raises:
        InvalidSceneSpecError: If a count is below 1.
        StorageError: If the directory cannot be written.
    """
    if n_train < 1 or n_val < 1:
        raise InvalidSceneSpecError(f"Need at least one training and one validation scene, got {n_train}/{n_val}")
    layout = DatasetLayout(out_dir)
    records, boxes = [], {}
    for index in range(n_train + n_val):
        scene = gen_scene(spec, scene_rng(seed, index))
        key = sample_id(index)
        record = ManifestRecord(
            id=key,
            split=TRAIN if index < n_train else VAL,
            image=layout.image_file(key),
            pixels=layout.label_file(key),
            strength=layout.strength_file(key),
            instances=layout.instance_file(key),
            image_label=scene.image_label.presence.tolist(),
        )
        layout.rasters.write(layout.path(record.image), scene.image, "rgb")
        layout.rasters.write(layout.path(record.pixels), scene.pixels.as_grid(), "gray")
        layout.rasters.write_strength(layout.path(record.strength), scene.strength.strength)
        layout.rasters.write(layout.path(record.instances), scene.instances + 1, "gray")
        boxes[key] = [(box, depth + 1) for box, depth in zip(scene.boxes, scene.box_instances)]
        records.append(record)
        log.debug("Scene %s: %d boxes", key, len(scene.boxes))

    layout.write_boxes(boxes)
    layout.write_manifest(records)
    layout.write_metadata({
        "format_version": FORMAT_VERSION,
        "num_classes": spec.num_classes,
        "height": spec.dims.h,
        "width": spec.dims.w,
        "seed": seed,
        "n_train": n_train,
        "n_val": n_val,
        "generator": spec.to_dict(),
        "mask_strategies": {},
    })
    log.info("Wrote %d training and %d validation scenes to %s", n_train, n_val, out_dir)
    return layout
