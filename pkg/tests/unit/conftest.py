"""
Test fixtures shared by the unit tests.

Fixtures:
    - classes: A four-class `ClassConfig`.
    - rng: A seeded numpy generator.
    - small_spec: A 24x24 scene specification that keeps generated datasets fast.
    - scenes: Twelve generated scenes of `small_spec`.
    - memory_dataset: An in-memory `Dataset` of those scenes (ten train, two val).
    - dataset_dir: A generated dataset directory (ten train, four val scenes).
    - runner: A click `CliRunner`.
    - ablation_report: A crafted ablation report in which every claim holds.

Usage:
    def test_something(dataset_dir):
        layout = DatasetLayout(dataset_dir)
"""

import numpy as np
import pytest
from click.testing import CliRunner
from src.lib.core import ClassConfig, Dims
from src.synthdata.dataset import gen_dataset, sample_id
from src.synthdata.scenes import SceneSpec, gen_scene, scene_rng
from src.trainer.samples import Dataset, Sample, TRAIN, VAL


@pytest.fixture
def classes():
    return ClassConfig(4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spec():
    return SceneSpec(dims=Dims(24, 24), num_classes=4)


@pytest.fixture
def scenes(small_spec):
    return [gen_scene(small_spec, scene_rng(3, k)) for k in range(12)]


@pytest.fixture
def memory_dataset(scenes):
    """
    Every sample carries every artifact, so any split is trainable.
    """
    samples = [
        Sample(
            id=sample_id(k),
            image=scene.image,
            split=TRAIN if k < 10 else VAL,
            pixels=scene.pixels,
            boxes=scene.boxes,
            image_label=scene.image_label,
            strength=scene.strength,
        )
        for k, scene in enumerate(scenes)
    ]
    return Dataset(ClassConfig(4), samples)


@pytest.fixture
def dataset_dir(tmp_path, small_spec):
    out = tmp_path / "synth"
    gen_dataset(small_spec, 10, 4, 5, str(out))
    return str(out)


@pytest.fixture
def runner():
    return CliRunner()


def crafted_cell(ratio, variant, miou, strategy="ucm", seeds=5):
    runs = [{"seed": s, "metrics": {"mIU": miou + 0.001 * s}, "error": None} for s in range(seeds)]
    mean = miou + 0.001 * (seeds - 1) / 2
    return {"ratio": ratio, "variant": variant, "strategy": strategy, "runs": runs, "failed": 0,
            "mean": {"mIU": mean}, "std": {"mIU": 0.001}}


@pytest.fixture
def ablation_report():
    """
    A report at 1:5:10 in which every claim holds.
    """
    return {
        "config": {"strategy_ratio": "1:5:10"},
        "grid": [
            crafted_cell("1:5:10", "p", 0.30),
            crafted_cell("1:5:10", "p+i", 0.32),
            crafted_cell("1:5:10", "p+b", 0.35),
            crafted_cell("1:5:10", "p+b+i", 0.40),
        ],
        "strategy_grid": [
            crafted_cell("1:5:10", "p+b+i", 0.40, "ucm"),
            crafted_cell("1:5:10", "p+b+i", 0.33, "rawbox"),
            crafted_cell("1:5:10", "p+b+i", 0.38, "hardseg"),
        ],
        "threshold_study": {"1/4": 0.80, "1/2": 0.78, "3/4": 0.60, "all": 0.82, "objects": 100},
        "failures": [],
    }
