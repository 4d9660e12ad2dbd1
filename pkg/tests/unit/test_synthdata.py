"""
Unit tests for the synthetic scene generator and the dataset writer.

Tests:
    - Ground truth of a scene is self-consistent.
    - Contours stay in [0.75, 1.0] and everything else is weak; gaps only when asked for.
    - Texture keeps off object edges; every class is common across scenes.
    - Equal generator states give equal scenes; equal arguments give equal trees.
    - Invalid generator parameters are rejected.
    - Box masks of generated scenes reach the calibration target (slow).
"""

import os
from dataclasses import replace
import numpy as np
import pytest
from src.experiments.mask_quality import GOOD_IOU, MaskedObject, calibration
from src.lib.core import Dims
from src.synthdata.dataset import gen_dataset
from src.synthdata.scenes import (
    BACKGROUND_DEPTH,
    SceneSpec,
    band_levels,
    contour_pixels,
    gen_scene,
    scene_rng,
)
from src.lib.exceptions import InvalidSceneSpecError


def tree_bytes(root):
    contents = {}
    for folder, _, files in os.walk(root):
        for name in files:
            path = os.path.join(folder, name)
            with open(path, "rb") as handle:
                contents[os.path.relpath(path, root)] = handle.read()
    return contents


def test_scene_ground_truth_is_consistent(scenes):
    for scene in scenes:
        labels = scene.pixels.as_grid()
        assert 1 <= len(scene.boxes) <= 3
        assert len(scene.boxes) == len(scene.box_instances)
        np.testing.assert_array_equal(labels == 0, scene.instances == BACKGROUND_DEPTH)
        for k, box in enumerate(scene.boxes):
            region = scene.object_region(k)
            assert region.any()
            assert np.all(labels[region] == box.class_id)
            inside = np.zeros(region.shape, dtype=bool)
            inside[box.slices] = True
            assert not np.any(region & ~inside)
        present = {int(c) for c in np.unique(labels) if c > 0}
        assert {c + 1 for c in np.flatnonzero(scene.image_label.presence)} == present


def test_strength_fidelity(scenes):
    for scene in scenes:
        grid = scene.strength.strength.reshape(scene.instances.shape)
        contour = contour_pixels(scene.instances)
        assert grid[contour].min(initial=1.0) >= 0.75
        assert grid[~contour].max(initial=0.0) <= 0.55
        np.testing.assert_allclose(grid * 255, np.rint(grid * 255), atol=1e-9)


def test_default_contours_stay_in_band():
    """
    Every contour pixel of 50 default 48x48 scenes, after 8-bit storage.

    Asserts:
        - All contour strengths lie in [0.75, 1.0].
    """
    spec = SceneSpec()
    assert spec.contour_gap_rate == 0.0
    for k in range(50):
        scene = gen_scene(spec, scene_rng(9, k))
        grid = scene.strength.strength.reshape(scene.instances.shape)
        values = grid[contour_pixels(scene.instances)]
        assert values.size > 0
        assert values.min() >= 0.75 and values.max() <= 1.0


def test_contour_gaps_are_opt_in(small_spec):
    spec = replace(small_spec, contour_gap_rate=1.0)
    for k in range(5):
        scene = gen_scene(spec, scene_rng(4, k))
        grid = scene.strength.strength.reshape(scene.instances.shape)
        values = grid[contour_pixels(scene.instances)]
        assert values.min() >= 0.62 and values.max() <= 0.72


def test_texture_keeps_off_the_object_edge():
    """
    Texture strokes lie where all eight neighbours belong to the same object and none is
    a contour pixel.
    """
    spec = SceneSpec()
    low, high = band_levels(spec.texture_strength)
    for k in range(30):
        scene = gen_scene(spec, scene_rng(6, k))
        codes = np.rint(scene.strength.strength.reshape(scene.instances.shape) * 255)
        texture = (codes >= low) & (codes <= high)
        contour = contour_pixels(scene.instances)
        padded = np.pad(scene.instances, 1, constant_values=BACKGROUND_DEPTH)
        padded_contour = np.pad(contour, 1, constant_values=True)
        for y, x in zip(*np.nonzero(texture)):
            window = padded[y:y + 3, x:x + 3]
            assert np.all(window == scene.instances[y, x]) and scene.instances[y, x] >= 0
            assert not padded_contour[y:y + 3, x:x + 3].any()


def test_every_class_is_common():
    """
    Each of the four classes appears in at least 20% of 600 default scenes.
    """
    spec = SceneSpec()
    present = np.zeros(spec.num_classes)
    for k in range(600):
        present += gen_scene(spec, scene_rng(2, k)).image_label.presence
    assert np.all(present / 600 >= 0.2)


def test_scene_generation_is_deterministic(small_spec):
    first = gen_scene(small_spec, scene_rng(11, 2))
    second = gen_scene(small_spec, scene_rng(11, 2))
    np.testing.assert_array_equal(first.image, second.image)
    np.testing.assert_array_equal(first.strength.strength, second.strength.strength)
    assert first.boxes == second.boxes


def test_gen_dataset_is_byte_identical(small_spec, tmp_path):
    gen_dataset(small_spec, 3, 2, 7, str(tmp_path / "a"))
    gen_dataset(small_spec, 3, 2, 7, str(tmp_path / "b"))
    first, second = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert first == second
    assert "manifest.jsonl" in first
    assert "instances/000004.pgm" in first


def test_gen_dataset_layout(dataset_dir):
    layout_files = tree_bytes(dataset_dir)
    assert len([name for name in layout_files if name.startswith("images")]) == 14
    assert layout_files["dataset.json"].endswith(b"\n")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dims": Dims(12, 24)},
        {"num_classes": 1},
        {"num_classes": 32},
        {"overlap_probability": 1.5},
        {"objects": (0, 2)},
        {"objects": (3, 2)},
        {"contour_strength": (0.9, 0.8)},
        {"contour_gap_rate": -0.1},
        {"texture_strength": (0.3001, 0.3002)},
        {"radius_fraction": (0.01, 0.2)},
    ]
)
def test_invalid_scene_spec(kwargs):
    with pytest.raises(InvalidSceneSpecError):
        SceneSpec(**kwargs)


def test_gen_dataset_needs_both_splits(small_spec, tmp_path):
    with pytest.raises(InvalidSceneSpecError):
        gen_dataset(small_spec, 3, 0, 0, str(tmp_path))


def test_spec_dict_lists_gap_settings():
    assert SceneSpec().to_dict()["contour_gap_rate"] == 0.0
    spec = replace(SceneSpec(), contour_gap_rate=0.05)
    assert spec.to_dict()["contour_gap_rate"] == 0.05
    assert spec.to_dict()["height"] == 48


@pytest.mark.slow
def test_box_masks_meet_calibration_target():
    """
    Box masks at the default settings on 48x48 scenes.

    Asserts:
        - At least 90% of objects reach IoU >= 0.7 with their visible region.
    """
    spec = SceneSpec()
    objects = []
    for k in range(150):
        scene = gen_scene(spec, scene_rng(0, k))
        objects.extend(MaskedObject(scene.strength, box, scene.object_region(j))
                       for j, box in enumerate(scene.boxes))
    summary = calibration(objects)
    assert summary["objects"] == len(objects)
    assert summary["good_share"] >= 0.9
    assert GOOD_IOU == 0.7
