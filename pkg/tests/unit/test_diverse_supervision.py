"""
Unit tests for the command-line tool in `src.diverse_supervision`.

Tests:
    - Usage errors exit with 2 and domain errors with 1; check-ablation reports its usage
      errors as UNKNOWN (3).
    - gen-data is byte-for-byte reproducible.
    - make-masks, train and eval run end to end on a small dataset; pixel-only runs do not
      need boxes.
    - ablate hands --alpha to the plan.
    - ablate reports failed sub-runs with exit code 1.
    - check-ablation exits with the Nagios codes 0-3.
"""

import json
import os
from unittest.mock import patch
import pytest
from src.diverse_supervision import cli
from src.storage.dataset_layout import DatasetLayout
from src.storage.checkpoint import write_checkpoint
from src.toynet.network import Architecture, init_params
from src.lib.exceptions import TooFewSamplesError


def read_tree(root):
    contents = {}
    for folder, _, files in os.walk(root):
        for name in files:
            with open(os.path.join(folder, name), "rb") as handle:
                contents[os.path.relpath(os.path.join(folder, name), root)] = handle.read()
    return contents


def test_gen_data_requires_out(runner):
    result = runner.invoke(cli, ["gen-data", "--count", "3"])
    assert result.exit_code == 2
    assert "--out" in result.output


def test_gen_data_rejects_small_scenes(runner, tmp_path):
    result = runner.invoke(cli, ["gen-data", "--out", str(tmp_path), "--size", "8"])
    assert result.exit_code == 2


def test_gen_data_is_reproducible(runner, tmp_path):
    args = ["--count", "4", "--val", "2", "--size", "20", "--seed", "7"]
    first = runner.invoke(cli, ["gen-data", "--out", str(tmp_path / "a")] + args)
    second = runner.invoke(cli, ["gen-data", "--out", str(tmp_path / "b")] + args)
    assert first.exit_code == second.exit_code == 0
    assert "Wrote 4 training and 2 validation scenes" in first.output
    assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")


def test_make_masks(runner, dataset_dir):
    result = runner.invoke(cli, ["make-masks", "--data", dataset_dir, "--strategy", "ucm", "--alpha", "30"])
    assert result.exit_code == 0
    assert result.output.startswith("ucm: 10 labels, mean object IoU ")
    assert os.path.isdir(os.path.join(dataset_dir, "masks", "ucm"))


def test_make_masks_unimplemented_baseline(runner, dataset_dir):
    result = runner.invoke(cli, ["make-masks", "--data", dataset_dir, "--strategy", "grabcut"])
    assert result.exit_code == 1
    assert "unimplemented baseline" in result.output


def test_train_and_eval(runner, dataset_dir, tmp_path):
    """
    Trains for a few steps and evaluates the checkpoint.

    Asserts:
        - Both commands exit with 0.
        - The checkpoint, the training log and both report files exist.
        - The JSON report holds exactly the four metrics and the per-class IU.
    """
    ckpt = str(tmp_path / "run" / "model.ckpt")
    result = runner.invoke(cli, ["train", "--data", dataset_dir, "--ratio", "1:2:3", "--iters", "3",
                                 "--seed", "1", "--out", ckpt])
    assert result.exit_code == 0, result.output
    assert os.path.exists(ckpt)
    assert os.path.exists(str(tmp_path / "run" / "model.log"))

    report = str(tmp_path / "run" / "eval.json")
    result = runner.invoke(cli, ["eval", "--ckpt", ckpt, "--data", dataset_dir, "--report", report])
    assert result.exit_code == 0, result.output
    assert "mIU=" in result.output
    with open(report, encoding="utf-8") as handle:
        metrics = json.load(handle)
    assert set(metrics) == {"pAcc", "mAcc", "mIU", "fwIU", "per_class_iu"}
    assert len(metrics["per_class_iu"]) == 5
    assert os.path.exists(str(tmp_path / "run" / "eval.txt"))


def test_train_with_bad_ratio(runner, dataset_dir, tmp_path):
    result = runner.invoke(cli, ["train", "--data", dataset_dir, "--ratio", "1:2", "--out", str(tmp_path / "m.ckpt")])
    assert result.exit_code == 1
    assert "Cannot parse ratio" in result.output


def test_train_with_too_few_samples(runner, dataset_dir, tmp_path):
    result = runner.invoke(cli, ["train", "--data", dataset_dir, "--ratio", "1:5:10", "--iters", "2",
                                 "--out", str(tmp_path / "m.ckpt")])
    assert result.exit_code == 1
    assert not os.path.exists(str(tmp_path / "m.ckpt"))


def test_eval_class_mismatch(runner, dataset_dir, tmp_path):
    ckpt = str(tmp_path / "two.ckpt")
    write_checkpoint(ckpt, init_params(Architecture(2, (4, 6)), 0))
    result = runner.invoke(cli, ["eval", "--ckpt", ckpt, "--data", dataset_dir, "--report",
                                 str(tmp_path / "r.json")])
    assert result.exit_code == 1
    assert "predicts 2 classes" in result.output


def test_eval_missing_checkpoint(runner, dataset_dir, tmp_path):
    result = runner.invoke(cli, ["eval", "--ckpt", str(tmp_path / "none.ckpt"), "--data", dataset_dir,
                                 "--report", str(tmp_path / "r.json")])
    assert result.exit_code == 1


def test_ablate_with_failing_sub_runs(runner, dataset_dir, tmp_path):
    out = str(tmp_path / "ablation")
    with patch("src.experiments.ablation.execute", side_effect=TooFewSamplesError("too few")):
        result = runner.invoke(cli, ["ablate", "--data", dataset_dir, "--ratios", "1:2:3", "--variants", "p",
                                     "--seeds", "1", "--iters", "2", "--strategy-ratio", "1:2:3", "--out", out])
    assert result.exit_code == 1
    assert "sub-runs failed" in result.output
    assert os.path.exists(os.path.join(out, "ablation.json"))
    assert os.path.exists(os.path.join(out, "ablation.txt"))


def write_report(tmp_path, report):
    path = tmp_path / "ablation.json"
    path.write_text(json.dumps(report), encoding="utf-8")
    return str(path)


def test_check_ablation_ok(runner, ablation_report, tmp_path):
    result = runner.invoke(cli, ["check-ablation", "--report", write_report(tmp_path, ablation_report)])
    assert result.exit_code == 0
    assert "ABLATION OK" in result.output


def test_check_ablation_warning(runner, ablation_report, tmp_path):
    ablation_report["strategy_grid"][2]["mean"]["mIU"] = 0.9
    result = runner.invoke(cli, ["check-ablation", "--report", write_report(tmp_path, ablation_report)])
    assert result.exit_code == 1
    assert "ABLATION WARNING" in result.output
    assert "soft_vs_hard fails, investigation note required" in result.output


def test_check_ablation_critical(runner, ablation_report, tmp_path):
    ablation_report["threshold_study"]["all"] = 0.1
    result = runner.invoke(cli, ["check-ablation", "--report", write_report(tmp_path, ablation_report)])
    assert result.exit_code == 2
    assert "ABLATION CRITICAL" in result.output


def test_check_ablation_margin_option(runner, ablation_report, tmp_path):
    path = write_report(tmp_path, ablation_report)
    result = runner.invoke(cli, ["check-ablation", "--report", path, "--min-margin", "0.5"])
    assert result.exit_code == 2
    assert "margin fails" in result.output


def test_check_ablation_failed_sub_runs(runner, ablation_report, tmp_path):
    ablation_report["failures"] = [{"seed": 0, "error": "TooFewSamplesError: too few"}]
    result = runner.invoke(cli, ["check-ablation", "--report", write_report(tmp_path, ablation_report)])
    assert result.exit_code == 3
    assert "ABLATION UNKNOWN" in result.output


def test_check_ablation_missing_report(runner, tmp_path):
    result = runner.invoke(cli, ["check-ablation", "--report", str(tmp_path / "missing.json")])
    assert result.exit_code == 3
    assert "Unable to read the ablation report." in result.output


@pytest.mark.parametrize(
    "args",
    [
        ["check-ablation"],
        ["check-ablation", "--report", "r.json", "--min-margin", "abc"],
        ["check-ablation", "--report", "r.json", "--colour"],
    ]
)
def test_check_ablation_usage_errors_are_unknown(runner, args):
    result = runner.invoke(cli, args)
    assert result.exit_code == 3
    assert "ABLATION UNKNOWN" in result.output


def test_train_pixel_only_without_boxes(runner, dataset_dir, tmp_path):
    """
    Drops the boxes and strength map of one training sample.

    Asserts:
        - Variant "p" trains anyway, since it never reads box labels.
        - The default variant still refuses the dataset.
    """
    layout = DatasetLayout(dataset_dir)
    records = layout.read_manifest()
    records[0].strength = None
    layout.write_manifest(records)
    boxes = layout.read_boxes()
    del boxes[records[0].id]
    layout.write_boxes(boxes)

    result = runner.invoke(cli, ["train", "--data", dataset_dir, "--ratio", "1:0:0", "--variant", "p",
                                 "--iters", "2", "--out", str(tmp_path / "p.ckpt")])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli, ["train", "--data", dataset_dir, "--ratio", "1:2:3", "--iters", "2",
                                 "--out", str(tmp_path / "pbi.ckpt")])
    assert result.exit_code == 1
    assert "has no boxes" in result.output


def test_ablate_passes_alpha(runner, dataset_dir, tmp_path):
    with patch("src.diverse_supervision.run_ablation", return_value={"grid": []}) as run:
        result = runner.invoke(cli, ["ablate", "--data", dataset_dir, "--alpha", "12.5", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert run.call_args.args[0].alpha == 12.5
    result = runner.invoke(cli, ["ablate", "--data", dataset_dir, "--alpha", "0", "--out", str(tmp_path)])
    assert result.exit_code == 2
