"""
Evaluation and ablation reports.

Every report is written twice: a JSON document (sorted keys, two-space indent) and a
sibling .txt file with an aligned-column table. Metric values in the tables are shown in
percent with two decimals; the JSON keeps full floats.

Example Usage:
    write_eval_report("runs/eval.json", report)
    -> runs/eval.json, runs/eval.txt
"""

import json
import logging
import os
from src.metrics.confusion import METRIC_KEYS
from src.lib.exceptions import StorageError

ABLATION_JSON = "ablation.json"
ABLATION_TEXT = "ablation.txt"
FAILED_CELL = "failed"

log = logging.getLogger(__name__)


def text_path(json_path):
    root, _ = os.path.splitext(json_path)
    return root + ".txt"


def _write(path, text):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as e:
        log.error("Cannot write report %s: %s", path, e)
        raise StorageError(f"Cannot write report '{path}': {e}") from e


def to_json(document):
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def percent(value):
    return "-" if value is None else f"{100.0 * value:.2f}"


def table(header, rows):
    """Left-aligned columns, two spaces apart."""
    widths = [max(len(str(row[k])) for row in [header] + rows) for k in range(len(header))]
    lines = ["  ".join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip()
             for row in [header] + rows]
    return "\n".join(lines) + "\n"


def eval_table(report):
    rows = [[key, percent(report[key])] for key in METRIC_KEYS]
    rows += [[f"IU[{c}]", percent(iu)] for c, iu in enumerate(report["per_class_iu"])]
    return table(["metric", "value"], rows)


def write_eval_report(path, report):
    """
    Writes an evaluation report and its text table.

    Args:
        path (str): JSON target; the table goes next to it with a .txt suffix.
        report (dict): pAcc, mAcc, mIU, fwIU and per_class_iu.
    """
    document = {key: report[key] for key in METRIC_KEYS + ("per_class_iu",)}
    _write(path, to_json(document))
    _write(text_path(path), eval_table(document))
    log.info("Evaluation report written to %s", path)


def read_json(path):
    """
    Raises:
        StorageError: If the file is missing or not JSON.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        log.error("Cannot read report %s: %s", path, e)
        raise StorageError(f"Cannot read report '{path}': {e}") from e


def _cell_value(cell, key):
    if cell["mean"] is None:
        return FAILED_CELL
    return f"{percent(cell['mean'][key])}±{percent(cell['std'][key])}"


def grid_table(cells, with_ratio=False):
    header = ["ratio", "variant", "strategy"] + list(METRIC_KEYS) + ["failed"]
    if with_ratio:
        header.append("semi/full")
    rows = []
    for cell in cells:
        row = [cell["ratio"], cell["variant"], cell["strategy"]]
        row += [_cell_value(cell, key) for key in METRIC_KEYS]
        row.append(str(cell["failed"]))
        if with_ratio:
            row.append("-" if cell.get("semi_full") is None else f"{cell['semi_full']:.1f}%")
        rows.append(row)
    return table(header, rows)


def ablation_text(report):
    config = report["config"]
    parts = [
        f"# ratios={','.join(config['ratios'])} variants={','.join(config['variants'])} "
        f"seeds={config['seeds']} iterations={config['iterations']}\n",
        "\nvariant grid\n",
        grid_table(report["grid"], with_ratio=config.get("upper_bound", False)),
        "\nstrategy grid\n",
        grid_table(report["strategy_grid"]),
        "\nthreshold study (mean per-object IoU)\n",
    ]
    study = report["threshold_study"]
    columns = ["1/4", "1/2", "3/4", "all"]
    rows = [["plain", str(study["objects"])] + [percent(study[k]) for k in columns]]
    decided = study.get("decided")
    if decided:
        rows.append(["decided", str(study["objects"])] + [percent(decided.get(k)) for k in columns])
    parts.append(table(["IoU", "objects"] + columns, rows))
    if report["failures"]:
        parts.append("\nfailed sub-runs\n")
        parts.append(table(["ratio", "variant", "strategy", "seed", "error"],
                           [[f["ratio"], f["variant"], f["strategy"], str(f["seed"]), f["error"]]
                            for f in report["failures"]]))
    return "".join(parts)


def write_ablation_report(out_dir, report):
    """
    Writes ablation.json and ablation.txt into out_dir.

    Returns:
        str: Path of the JSON document.
    """
    path = os.path.join(out_dir, ABLATION_JSON)
    _write(path, to_json(report))
    _write(os.path.join(out_dir, ABLATION_TEXT), ablation_text(report))
    log.info("Ablation report written to %s", path)
    return path
