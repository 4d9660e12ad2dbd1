"""
The ablation harness.

One ablation reads one dataset directory and runs three studies:

- variant grid: every (ratio, variant) cell trained and evaluated once per seed, with the
  "ucm" box strategy; with `upper_bound` each variant gets its "_ub" twin and the cell
  reports the semi/full mIU ratio in percent;
- strategy grid: "p+b+i" at `strategy_ratio` with each box strategy;
- threshold study: mean per-object mask IoU of the single thresholds 1/4, 1/2, 3/4 and
  of all three, over the training boxes of the dataset, with decided IoU beside it.

Every sub-run builds its box labels with the plan's alpha; labels stored by make-masks are
reused only when they were made with that alpha.

A sub-run is a pure function of its `SubRun` record, so sub-runs may run in any order
and in any process. Sub-runs shared by two studies run once. A failing sub-run is recorded
and its cell keeps the seeds that succeeded; `run_ablation` writes the report first and
then raises `AblationFailedError`.

Example Usage:
    plan = AblationPlan("data/synth", ratios=("1:5:10",), seeds=5, iterations=8000)
    report = run_ablation(plan, "runs/ablation")
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import functools
import logging
import numpy as np
from src.boxmask.masks import BoxMaskConfig
from src.experiments.mask_quality import threshold_study
from src.experiments.pseudo_labels import masked_objects
from src.lib.config import Config
from src.metrics.confusion import METRIC_KEYS
from src.metrics.evaluation import evaluate
from src.storage.dataset_layout import DatasetLayout, STRENGTH_STRATEGIES
from src.storage.reports import write_ablation_report
from src.trainer.splits import Ratio, VARIANTS, UPPER_BOUND_SUFFIX, parse_variant, variant_branches
from src.trainer.training import TrainConfig, train
from src.lib.exceptions import AblationFailedError, DiverseSupervisionError, InvalidTrainConfigError

DEFAULT_RATIOS = ("1:1:1", "1:2:3", "1:5:10")
STRATEGIES = ("ucm", "rawbox", "hardseg")
STRATEGY_VARIANT = "p+b+i"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubRun:
    """One training run plus its evaluation on the validation split."""
    data_dir: str
    ratio: str
    variant: str
    strategy: str
    seed: int
    iterations: int
    lr: float = Config.LEARNING_RATE
    momentum: float = Config.MOMENTUM
    weight_decay: float = Config.WEIGHT_DECAY
    alpha: float = Config.ALPHA_PERCENT


@dataclass
class AblationPlan:
    """
    Attributes:
        data_dir (str): Dataset directory.
        ratios (tuple[str]): Ratios of the variant grid.
        variants (tuple[str]): Base variants of the variant grid.
        seeds (int): Seeds 0..seeds-1 per cell.
        iterations (int): SGD steps per sub-run.
        upper_bound (bool): Also run the "_ub" twin of every variant.
        strategy_ratio (str): Ratio of the strategy grid.
        strategies (tuple[str]): Box strategies of the strategy grid.
        workers (int): Worker processes; 1 runs everything in this process.
        max_objects (int | None): Cap on the boxes of the threshold study.
        alpha (float): Confident-mask area threshold of every sub-run and of the study.
    """
    data_dir: str
    ratios: tuple = DEFAULT_RATIOS
    variants: tuple = VARIANTS
    seeds: int = 5
    iterations: int = 8000
    upper_bound: bool = False
    strategy_ratio: str = "1:5:10"
    strategies: tuple = STRATEGIES
    workers: int = Config.ABLATION_WORKERS
    max_objects: int = None
    lr: float = Config.LEARNING_RATE
    momentum: float = Config.MOMENTUM
    weight_decay: float = Config.WEIGHT_DECAY
    alpha: float = Config.ALPHA_PERCENT

    def __post_init__(self):
        self.ratios = tuple(str(Ratio.parse(r)) for r in self.ratios)
        self.strategy_ratio = str(Ratio.parse(self.strategy_ratio))
        for variant in self.variants:
            _, upper = parse_variant(variant)
            if upper:
                raise InvalidTrainConfigError(
                    f"List base variants only, '{variant}' is added by the upper-bound option")
        self.variants = tuple(self.variants)
        if self.seeds < 1 or self.iterations < 1 or self.workers < 1:
            raise InvalidTrainConfigError(
                f"seeds, iterations and workers must be >= 1, got {self.seeds}/{self.iterations}/{self.workers}")

    def sub_run(self, ratio, variant, strategy, seed):
        return SubRun(self.data_dir, ratio, variant, strategy, seed, self.iterations,
                      self.lr, self.momentum, self.weight_decay, self.alpha)

    def grid_variants(self):
        if not self.upper_bound:
            return self.variants
        return tuple(v for base in self.variants for v in (base, base + UPPER_BOUND_SUFFIX))

    def variant_cells(self):
        return [(ratio, variant, "ucm") for ratio in self.ratios for variant in self.grid_variants()]

    def strategy_cells(self):
        return [(self.strategy_ratio, STRATEGY_VARIANT, strategy) for strategy in self.strategies]

    def sub_runs(self):
        """Every distinct sub-run in report order."""
        runs = {}
        for ratio, variant, strategy in self.variant_cells() + self.strategy_cells():
            for seed in range(self.seeds):
                run = self.sub_run(ratio, variant, strategy, seed)
                runs.setdefault(run, None)
        return list(runs)


@functools.lru_cache(maxsize=4)
def _load(data_dir, strategy, branches):
    return DatasetLayout(data_dir).load(strategy, branches)


def precomputed_strategy(run):
    """
    The strategy whose stored labels the sub-run may reuse, or None when the labels must
    be built during training: they are missing, or they were made with another alpha.
    """
    record = DatasetLayout(run.data_dir).read_metadata().get("mask_strategies", {}).get(run.strategy)
    if record is None:
        return None
    if run.strategy in STRENGTH_STRATEGIES and float(record.get("alpha", -1)) != float(run.alpha):
        log.info("Stored %s labels use alpha %s, rebuilding them with alpha %s",
                 run.strategy, record.get("alpha"), run.alpha)
        return None
    return run.strategy


def execute(run):
    """
    Trains and evaluates one sub-run.

    Returns:
        dict: The evaluation report of the validation split.
    """
    dataset = _load(run.data_dir, precomputed_strategy(run), variant_branches(run.variant))
    config = TrainConfig(
        ratio=run.ratio,
        iterations=run.iterations,
        seed=run.seed,
        lr=run.lr,
        momentum=run.momentum,
        weight_decay=run.weight_decay,
        variant=run.variant,
        box_strategy=run.strategy,
        mask_config=BoxMaskConfig(alpha_percent=run.alpha),
        log_interval=max(1, min(Config.LOG_INTERVAL, run.iterations)),
    )
    return evaluate(train(dataset, config).params, dataset)


def attempt(run):
    """
    `execute` with failures turned into data.

    Returns:
        tuple[dict | None, str | None]: The report or None, and the error message or None.
    """
    try:
        return execute(run), None
    except DiverseSupervisionError as e:
        log.error("Sub-run %s failed: %s", run, e)
        return None, f"{type(e).__name__}: {e}"
    except (ArithmeticError, ValueError, MemoryError) as e:
        log.exception("Sub-run %s crashed", run)
        return None, f"{type(e).__name__}: {e}"


def run_all(runs, workers):
    """Outcomes of `attempt` keyed by sub-run."""
    if workers > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(attempt, runs))
    else:
        outcomes = [attempt(run) for run in runs]
    return dict(zip(runs, outcomes))


def summarize(ratio, variant, strategy, seeds, outcomes, plan):
    """Per-seed results with mean and population std over the seeds that succeeded."""
    runs, good = [], []
    for seed in range(seeds):
        report, error = outcomes[plan.sub_run(ratio, variant, strategy, seed)]
        runs.append({"seed": seed, "metrics": report, "error": error})
        if report is not None:
            good.append(report)
    cell = {
        "ratio": ratio,
        "variant": variant,
        "strategy": strategy,
        "runs": runs,
        "failed": seeds - len(good),
        "mean": None,
        "std": None,
    }
    if good:
        cell["mean"] = {key: float(np.mean([r[key] for r in good])) for key in METRIC_KEYS}
        cell["std"] = {key: float(np.std([r[key] for r in good])) for key in METRIC_KEYS}
    return cell


def add_semi_full(cells):
    """Sets semi_full = 100 * mIU(v) / mIU(v_ub) on every base cell with a twin."""
    by_key = {(c["ratio"], c["variant"]): c for c in cells}
    for cell in cells:
        cell.setdefault("semi_full", None)
        twin = by_key.get((cell["ratio"], cell["variant"] + UPPER_BOUND_SUFFIX))
        if twin and cell["mean"] and twin["mean"] and twin["mean"]["mIU"] > 0:
            cell["semi_full"] = 100.0 * cell["mean"]["mIU"] / twin["mean"]["mIU"]


def study_thresholds(plan):
    objects = list(masked_objects(DatasetLayout(plan.data_dir)))
    if plan.max_objects is not None:
        objects = objects[:plan.max_objects]
    study = threshold_study(objects, plan.alpha)
    study["objects"] = len(objects)
    return study


def run_ablation(plan, out_dir):
    """
    Runs the three studies and writes ablation.json and ablation.txt into out_dir.

    Returns:
        dict: The report.

    Raises:
        AblationFailedError: After writing the report, if any sub-run failed.
    """
    runs = plan.sub_runs()
    log.info("Ablation over %s: %d sub-runs with %d worker(s)", plan.data_dir, len(runs), plan.workers)
    outcomes = run_all(runs, plan.workers)

    grid = [summarize(r, v, s, plan.seeds, outcomes, plan) for r, v, s in plan.variant_cells()]
    add_semi_full(grid)
    strategy_grid = [summarize(r, v, s, plan.seeds, outcomes, plan) for r, v, s in plan.strategy_cells()]
    failures = [{"ratio": run.ratio, "variant": run.variant, "strategy": run.strategy,
                 "seed": run.seed, "error": error}
                for run, (_, error) in outcomes.items() if error is not None]
    report = {
        "config": {
            "data": plan.data_dir,
            "ratios": list(plan.ratios),
            "variants": list(plan.variants),
            "seeds": plan.seeds,
            "iterations": plan.iterations,
            "upper_bound": plan.upper_bound,
            "strategy_ratio": plan.strategy_ratio,
            "strategies": list(plan.strategies),
            "lr": plan.lr,
            "momentum": plan.momentum,
            "weight_decay": plan.weight_decay,
            "alpha": plan.alpha,
        },
        "grid": grid,
        "strategy_grid": strategy_grid,
        "threshold_study": study_thresholds(plan),
        "failures": failures,
    }
    write_ablation_report(out_dir, report)
    if failures:
        raise AblationFailedError(f"{len(failures)} of {len(runs)} sub-runs failed, see {out_dir}")
    return report
