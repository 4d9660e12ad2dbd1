"""
On-disk dataset directory.

    <root>/dataset.json             class count, dims, generator parameters, mask strategies
    <root>/manifest.jsonl           one record per sample
    <root>/boxes.jsonl              one record per box: {id, class, x0, y0, x1, y1, instance}
    <root>/images/<id>.ppm          8-bit RGB
    <root>/labels/<id>.pgm          class index per pixel, 255 = ignore
    <root>/strength/<id>.pgm        boundary strength * 255
    <root>/instances/<id>.pgm       visible object per pixel, 0 = background, k = box instance k
    <root>/masks/<strategy>/<id>.*  box-branch labels: .dssl soft labels or .pgm hard labels

A manifest record carries the sample id, its split ("train" or "val"), relative paths of
its rasters (null when absent), the image-level presence vector and a mapping from
strategy name to the relative path of its precomputed box label.

JSON documents are written with sorted keys and fixed separators, so equal content gives
equal bytes.

Classes:
    ManifestRecord: One manifest line.
    DatasetLayout: Reads and writes a dataset directory.
"""

from dataclasses import dataclass, field
import json
import logging
import os
import numpy as np
from src.boxmask.masks import BoundingBox, BoundaryStrengthMap
from src.lib.core import ClassConfig, Dims
from src.lib.raster_driver import RasterDriver
from src.losses.labels import ImageLabel, PixelLabelMap
from src.storage.soft_label_codec import read_soft_label, write_soft_label
from src.trainer.samples import Dataset, Sample, TRAIN, VAL
from src.lib.exceptions import (
    InvalidBoxError,
    InvalidImageLabelError,
    ManifestError,
    StorageError,
)

FORMAT_VERSION = 1
METADATA_FILE = "dataset.json"
MANIFEST_FILE = "manifest.jsonl"
BOXES_FILE = "boxes.jsonl"
STRENGTH_STRATEGIES = ("ucm", "hardseg")


def dump_json(document):
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


@dataclass
class ManifestRecord:
    id: str
    split: str
    image: str
    pixels: str = None
    strength: str = None
    instances: str = None
    image_label: list = None
    soft_labels: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "id": self.id,
            "split": self.split,
            "image": self.image,
            "pixels": self.pixels,
            "strength": self.strength,
            "instances": self.instances,
            "image_label": self.image_label,
            "soft_labels": dict(self.soft_labels),
        }

    @classmethod
    def from_dict(cls, data):
        """
        Raises:
            ManifestError: If required fields are missing or the split is unknown.
        """
        try:
            record = cls(
                id=str(data["id"]),
                split=data["split"],
                image=data["image"],
                pixels=data.get("pixels"),
                strength=data.get("strength"),
                instances=data.get("instances"),
                image_label=data.get("image_label"),
                soft_labels=dict(data.get("soft_labels") or {}),
            )
        except (KeyError, TypeError) as e:
            raise ManifestError(f"Malformed manifest record {data!r}") from e
        if record.split not in (TRAIN, VAL):
            raise ManifestError(f"Sample '{record.id}' has unknown split '{record.split}'")
        return record


class DatasetLayout():
    """
    A dataset directory.

    Attributes:
        root (str): Directory path.
        rasters (RasterDriver): PPM/PGM reader and writer.
        log (logging.Logger): Logger instance for debugging and error logging.
    """

    def __init__(self, root):
        self.root = root
        self.rasters = RasterDriver()
        self.log = logging.getLogger(__name__)

    def path(self, relative):
        return os.path.join(self.root, relative)

    @staticmethod
    def image_file(sample_id):
        return f"images/{sample_id}.ppm"

    @staticmethod
    def label_file(sample_id):
        return f"labels/{sample_id}.pgm"

    @staticmethod
    def strength_file(sample_id):
        return f"strength/{sample_id}.pgm"

    @staticmethod
    def instance_file(sample_id):
        return f"instances/{sample_id}.pgm"

    @staticmethod
    def mask_file(strategy, sample_id, kind):
        return f"masks/{strategy}/{sample_id}.{'dssl' if kind == 'soft' else 'pgm'}"

    # ---- documents ----

    def _write_text(self, relative, text):
        target = self.path(relative)
        try:
            os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
            with open(target, "w", encoding="utf-8") as handle:
                handle.write(text)
        except OSError as e:
            self.log.error("Cannot write %s: %s", target, e)
            raise StorageError(f"Cannot write '{target}': {e}") from e

    def _read_lines(self, relative):
        target = self.path(relative)
        try:
            with open(target, encoding="utf-8") as handle:
                return [line for line in handle.read().splitlines() if line.strip()]
        except OSError as e:
            self.log.error("Cannot read %s: %s", target, e)
            raise ManifestError(f"Cannot read '{target}': {e}") from e

    def _parse(self, relative, line):
        try:
            return json.loads(line)
        except json.JSONDecodeError as e:
            raise ManifestError(f"{relative}: invalid JSON record: {e}") from e

    def write_metadata(self, metadata):
        self._write_text(METADATA_FILE, dump_json(metadata) + "\n")

    def read_metadata(self):
        """
        Raises:
            ManifestError: If dataset.json is missing or lacks num_classes, height or width.
        """
        metadata = self._parse(METADATA_FILE, "\n".join(self._read_lines(METADATA_FILE)))
        for key in ("num_classes", "height", "width"):
            if key not in metadata:
                raise ManifestError(f"{METADATA_FILE} lacks '{key}'")
        return metadata

    def write_manifest(self, records):
        self._write_text(MANIFEST_FILE, "".join(dump_json(r.to_dict()) + "\n" for r in records))

    def read_manifest(self):
        """
        Raises:
            ManifestError: On malformed records or duplicate ids.
        """
        records = [ManifestRecord.from_dict(self._parse(MANIFEST_FILE, line))
                   for line in self._read_lines(MANIFEST_FILE)]
        seen = set()
        for record in records:
            if record.id in seen:
                raise ManifestError(f"Duplicate sample id '{record.id}' in {MANIFEST_FILE}")
            seen.add(record.id)
        return records

    def write_boxes(self, boxes_by_id):
        """
        Args:
            boxes_by_id (dict[str, list[tuple[BoundingBox, int]]]): Boxes with their
                instance numbers, per sample id.
        """
        lines = []
        for sample_id, boxes in boxes_by_id.items():
            for box, instance in boxes:
                lines.append(dump_json({"id": sample_id, "class": box.class_id, "x0": box.x0, "y0": box.y0,
                                        "x1": box.x1, "y1": box.y1, "instance": instance}) + "\n")
        self._write_text(BOXES_FILE, "".join(lines))

    def read_boxes(self):
        """
        Returns:
            dict[str, list[tuple[BoundingBox, int | None]]]: Boxes per sample id in file order.
        """
        boxes = {}
        for line in self._read_lines(BOXES_FILE):
            data = self._parse(BOXES_FILE, line)
            try:
                box = BoundingBox(data["class"], data["x0"], data["y0"], data["x1"], data["y1"])
                boxes.setdefault(str(data["id"]), []).append((box, data.get("instance")))
            except (KeyError, TypeError, InvalidBoxError) as e:
                raise ManifestError(f"{BOXES_FILE}: invalid box record {data!r}") from e
        return boxes

    # ---- samples ----

    def box_label(self, record, strategy):
        """
        Reads the precomputed box label of a record, or None when there is none.
        """
        relative = record.soft_labels.get(strategy)
        if relative is None:
            return None
        if relative.endswith(".dssl"):
            soft, _ = read_soft_label(self.path(relative))
            return soft
        return PixelLabelMap.from_grid(self.rasters.read(self.path(relative), "gray"))

    def write_box_label(self, strategy, sample_id, label, num_classes):
        """
        Writes a box label and returns its relative path.
        """
        if isinstance(label, PixelLabelMap):
            relative = self.mask_file(strategy, sample_id, "hard")
            self.rasters.write(self.path(relative), label.as_grid(), "gray")
        else:
            relative = self.mask_file(strategy, sample_id, "soft")
            write_soft_label(self.path(relative), label, num_classes)
        return relative

    def read_instances(self, record):
        """Instance raster of a record (0 background, k for box instance k), or None."""
        if record.instances is None:
            return None
        return self.rasters.read(self.path(record.instances), "gray").astype(np.int64)

    def load_sample(self, record, boxes, classes, strategy=None):
        image = self.rasters.read(self.path(record.image), "rgb")
        dims = Dims(*image.shape[:2])
        pixels = None
        if record.pixels is not None:
            pixels = PixelLabelMap.from_grid(self.rasters.read(self.path(record.pixels), "gray"))
            pixels.validate(classes)
        strength = None
        if record.strength is not None:
            strength = BoundaryStrengthMap(dims, self.rasters.read_strength(self.path(record.strength)))
        image_label = None
        if record.image_label is not None:
            try:
                image_label = ImageLabel(record.image_label)
            except InvalidImageLabelError as e:
                raise ManifestError(f"Sample '{record.id}' has an invalid image label") from e
            if image_label.num_classes != classes.num_object_classes:
                raise ManifestError(
                    f"Sample '{record.id}' image label has {image_label.num_classes} entries, C={classes.num_object_classes}")
        return Sample(
            id=record.id,
            image=image,
            split=record.split,
            pixels=pixels,
            boxes=[box for box, _ in boxes] if boxes is not None else None,
            image_label=image_label,
            strength=strength,
            box_label=self.box_label(record, strategy) if strategy else None,
        )

    def validate(self, records, boxes, strategy, branches=None):
        """
        Rejects training samples that could not serve the box branch under `strategy`:
        without a precomputed label they need boxes, and a strength map when the strategy
        reads one. Runs whose `branches` leave out the box branch need neither.

        Raises:
            ManifestError: Naming the first offending sample.
        """
        if branches is not None and "box" not in branches:
            self.log.debug("Box branch unused, skipping box label checks")
            return
        for record in records:
            if record.split != TRAIN or strategy in record.soft_labels:
                continue
            if record.id not in boxes:
                raise ManifestError(f"Sample '{record.id}' has no boxes and no '{strategy}' label")
            if strategy in STRENGTH_STRATEGIES and record.strength is None:
                raise ManifestError(
                    f"Sample '{record.id}' has no strength map, which strategy '{strategy}' needs")

    def load(self, strategy="ucm", branches=None):
        """
        Reads the whole dataset into memory.

        Args:
            strategy (str | None): Box strategy whose precomputed labels to attach.
            branches (tuple[str], optional): Branches the run trains; box label checks are
                skipped when the box branch is not among them.

        Returns:
            Dataset: Samples in manifest order.

        Raises:
            ManifestError: If documents are missing or inconsistent.
            RasterIOError, RasterFormatError: If a raster cannot be read.
        """
        metadata = self.read_metadata()
        classes = ClassConfig(int(metadata["num_classes"]))
        records = self.read_manifest()
        boxes = self.read_boxes()
        unknown = sorted(set(boxes) - {r.id for r in records})
        if unknown:
            raise ManifestError(f"Boxes reference unknown sample ids: {', '.join(unknown[:5])}")
        if strategy:
            self.validate(records, boxes, strategy, branches)
        samples = [self.load_sample(r, boxes.get(r.id), classes, strategy) for r in records]
        self.log.info("Loaded %d samples from %s", len(samples), self.root)
        return Dataset(classes, samples, box_strategy=strategy)
