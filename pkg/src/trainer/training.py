"""
The training loop.

Each step draws one sample uniformly from the union of the split's subsets, runs the
network, evaluates the single loss branch that matches the sample's subset, back-propagates
and applies one momentum SGD step. The batch size is one.

Over any prefix of the run the accumulated loss equals the sum of the image, box and pixel
losses of the samples visited so far; `LossLedger` keeps both sides and `train` verifies
them at the end.

Seeding: `config.seed` drives the split shuffle directly. A `SeedSequence` built from it
spawns two children, one for weight initialisation and one for the draw order, so two runs
with the same configuration produce identical parameters.

Classes:
    TrainConfig: Everything a run depends on.
    LossLedger: Per-step losses and per-branch totals.
    TrainingLog: The line-oriented loss log written next to the checkpoint.
    TrainingResult: Parameters, optimizer state and bookkeeping of a finished run.

Example Usage:
    result = train(dataset, TrainConfig(ratio=Ratio.parse("1:5:10"), iterations=8000))
"""

from dataclasses import dataclass, field
import logging
import math
import os
import numpy as np
from src.boxmask.masks import BoxMaskConfig
from src.boxmask.strategies import BaseStrategy
from src.lib.config import Config
from src.losses.branches import BaseBranch, BRANCH_ORDER
from src.storage.checkpoint import write_checkpoint
from src.toynet.network import Architecture, DEFAULT_WIDTHS, init_params, forward, backward, to_network_input
from src.toynet.optimizer import (
    OptimizerState,
    sgd_step,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MOMENTUM,
    DEFAULT_WEIGHT_DECAY,
)
from src.trainer.splits import Ratio, split_dataset, apply_variant, next_sample, parse_variant
from src.lib.exceptions import (
    CorruptFeatureMapError,
    InvalidTrainConfigError,
    MissingLabelArtifactError,
    NonFiniteLossError,
    TrainingError,
)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """
    Attributes:
        ratio (Ratio): Subset ratio p:b:i.
        iterations (int): Number of SGD steps, at least 1.
        seed (int): Seed of the split, the initialisation and the draw order.
        lr (float): Learning rate.
        momentum (float): Momentum coefficient.
        weight_decay (float): Weight decay on kernels.
        variant (str): Ablation variant ("p", "p+i", "p+b", "p+b+i", optionally "_ub").
        box_strategy (str): Box-branch label strategy ("ucm", "rawbox" or "hardseg").
        mask_config (BoxMaskConfig): Pipeline parameters for labels built on the fly.
        widths (tuple[int, ...]): Hidden channel widths of the network.
        log_interval (int): Steps between training log lines.
        checkpoint_path (str | None): Where to write the final checkpoint.
        log_path (str | None): Where to write the training log.
    """
    ratio: Ratio = field(default_factory=lambda: Ratio(1, 1, 1))
    iterations: int = 1000
    seed: int = 0
    lr: float = DEFAULT_LEARNING_RATE
    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    variant: str = "p+b+i"
    box_strategy: str = "ucm"
    mask_config: BoxMaskConfig = field(default_factory=BoxMaskConfig)
    widths: tuple = DEFAULT_WIDTHS
    log_interval: int = Config.LOG_INTERVAL
    checkpoint_path: str = None
    log_path: str = None

    def __post_init__(self):
        self.ratio = Ratio.parse(self.ratio)
        if int(self.iterations) < 1:
            raise InvalidTrainConfigError(f"iterations must be >= 1, got {self.iterations}")
        if int(self.log_interval) < 1:
            raise InvalidTrainConfigError(f"log_interval must be >= 1, got {self.log_interval}")
        if self.lr <= 0 or not 0 <= self.momentum < 1 or self.weight_decay < 0:
            raise InvalidTrainConfigError(
                f"Invalid optimizer settings lr={self.lr}, momentum={self.momentum}, "
                f"weight_decay={self.weight_decay}")
        parse_variant(self.variant)
        BaseStrategy.get_strategy(self.box_strategy)

    def header(self):
        """Hyperparameters in the order the training log lists them."""
        return {
            "ratio": str(self.ratio),
            "iterations": self.iterations,
            "seed": self.seed,
            "lr": self.lr,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "batch_size": 1,
            "variant": self.variant,
            "box_strategy": self.box_strategy,
            "alpha": self.mask_config.alpha_percent,
            "thresholds": ",".join(str(t) for t in self.mask_config.thresholds),
            "widths": ",".join(str(w) for w in self.widths),
            "log_interval": self.log_interval,
        }


class LossLedger():
    """
    Bookkeeping of every step's loss, branch and sample.

    The running total is accumulated step by step; `verify` checks it against the loss
    totals each branch kept on its own and against the subsets the visited samples belong to.
    """

    def __init__(self):
        self.steps = []
        self.values = []
        self.branches = []
        self.sample_ids = []
        self.total = 0.0

    def record(self, step, branch, value, sample_id=None):
        self.steps.append(step)
        self.branches.append(branch)
        self.values.append(value)
        self.sample_ids.append(sample_id)
        self.total += value

    @property
    def branch_totals(self):
        """Per-branch sums recomputed from the recorded steps."""
        return {name: math.fsum(v for v, b in zip(self.values, self.branches) if b == name)
                for name in BRANCH_ORDER}

    def verify(self, branches=None, split=None):
        """
        Checks the running total against independently kept sums.

        Args:
            branches (dict[str, BaseBranch], optional): The run's branches; their own loss
                totals and activation counts must match the recorded steps.
            split (Split, optional): Every recorded sample must belong to the subset of the
                branch it was routed to.

        Raises:
            TrainingError: On the first disagreement beyond rounding.
        """
        recomputed = self.branch_totals
        if not math.isclose(self.total, math.fsum(recomputed.values()), rel_tol=1e-9, abs_tol=1e-9):
            raise TrainingError(
                f"Loss ledger out of balance: total {self.total!r}, branch sum {math.fsum(recomputed.values())!r}")
        for name, branch in (branches or {}).items():
            count = self.branches.count(name)
            if branch.activations != count:
                raise TrainingError(
                    f"Branch {name} was activated {branch.activations} times, ledger has {count} steps")
            if not math.isclose(branch.loss_total, recomputed[name], rel_tol=1e-9, abs_tol=1e-9):
                raise TrainingError(
                    f"Branch {name} accumulated {branch.loss_total!r}, ledger has {recomputed[name]!r}")
        if split is not None:
            for step, branch, sample_id in zip(self.steps, self.branches, self.sample_ids):
                try:
                    owner = split.branch_of(sample_id)
                except KeyError as e:
                    raise TrainingError(f"Step {step} visited '{sample_id}', which is in no subset") from e
                if owner != branch:
                    raise TrainingError(
                        f"Step {step} routed '{sample_id}' of the {owner} subset to the {branch} branch")
        return True

    def window_mean(self, size):
        window = self.values[-size:]
        return sum(window) / len(window)

    def branch_mean(self, branch, start, stop):
        """Mean loss of `branch` over steps with start <= index < stop (0-based)."""
        picked = [v for v, b in zip(self.values[start:stop], self.branches[start:stop]) if b == branch]
        return sum(picked) / len(picked) if picked else None


class TrainingLog():
    """
    A '#' header with every hyperparameter, then one line per logging interval:
    "step=<n> branch=<tag> loss=<value> window_mean=<value>".
    """

    def __init__(self, header):
        self.lines = ["# " + " ".join(f"{key}={value}" for key, value in header.items())]

    def add(self, step, branch, loss, window_mean):
        self.lines.append(f"step={step} branch={branch} loss={loss:.6f} window_mean={window_mean:.6f}")

    def text(self):
        return "\n".join(self.lines) + "\n"

    def write(self, path):
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(self.text())
        except OSError as e:
            raise TrainingError(f"Cannot write training log '{path}': {e}") from e


@dataclass
class TrainingResult:
    params: object
    optimizer: OptimizerState
    split: object
    ledger: LossLedger
    activations: dict
    log: TrainingLog


class _LabelSource():
    """
    Finds the label a branch needs for a sample, building box labels when no precomputed
    label exists. Built labels are cached for the rest of the run.
    """

    def __init__(self, dataset, config):
        self.dataset = dataset
        self.strategy = BaseStrategy.get_strategy(config.box_strategy)(config.mask_config, seed=config.seed)
        self.box_labels = {}

    def _missing(self, sample, branch, what):
        log.error("Sample %s drawn for the %s branch lacks %s", sample.id, branch, what)
        return MissingLabelArtifactError(
            f"Sample '{sample.id}' drawn for the {branch} branch has no {what}")

    def get(self, sample, branch):
        if branch == "pixel":
            if sample.pixels is None:
                raise self._missing(sample, branch, "pixel ground truth")
            return sample.pixels
        if branch == "image":
            if sample.image_label is None:
                raise self._missing(sample, branch, "image label")
            return sample.image_label.require_positive()
        if sample.box_label is not None and self.dataset.box_strategy in (None, self.strategy.name):
            return sample.box_label
        if sample.id not in self.box_labels:
            if sample.boxes is None:
                raise self._missing(sample, branch, "boxes or precomputed box label")
            if self.strategy.needs_strength and sample.strength is None:
                raise self._missing(sample, branch, "boundary-strength map")
            self.box_labels[sample.id] = self.strategy.label(
                sample.boxes, sample.strength, sample.dims, self.dataset.classes,
                key=self.dataset.position(sample.id))
        return self.box_labels[sample.id]


def train(dataset, config):
    """
    Trains the toy network on a dataset.

    Args:
        dataset (Dataset): Training and validation samples.
        config (TrainConfig): Run configuration.

    Returns:
        TrainingResult: Final parameters and run bookkeeping. The checkpoint and the log
        are written when their paths are set.

    Raises:
        TooFewSamplesError: If the training ids cannot be split by the ratio.
        InvalidImageLabelError: If an image-subset sample marks no class present; checked
            before the first step.
        MissingLabelArtifactError: If a drawn sample lacks its branch's label.
        NonFiniteLossError: If a step yields a non-finite loss; the message names the step.
        NonFiniteGradientError: If a step yields a non-finite gradient.
    """
    split = apply_variant(split_dataset(dataset.ids(), config.ratio, config.seed), config.variant)
    init_seed, draw_seed = np.random.SeedSequence(config.seed).spawn(2)
    arch = Architecture(dataset.classes.num_object_classes, config.widths)
    params = init_params(arch, init_seed)
    opt = OptimizerState.for_params(params, config.lr, config.momentum, config.weight_decay)
    rng = np.random.default_rng(draw_seed)
    branches = {name: BaseBranch.get_branch(name)() for name in BRANCH_ORDER}
    labels = _LabelSource(dataset, config)
    for sample_id in split.image_set:
        labels.get(dataset.get(sample_id), "image")
    ledger = LossLedger()
    training_log = TrainingLog(config.header())
    log.info("Training %s at %s for %d steps (seed %d, split %s)",
             config.variant, config.ratio, config.iterations, config.seed, split.sizes())

    for step in range(1, config.iterations + 1):
        sample_id, branch = next_sample(split, rng)
        sample = dataset.get(sample_id)
        label = labels.get(sample, branch)
        try:
            f, cache = forward(params, to_network_input(sample.image))
            result = branches[branch].compute(f, label)
        except CorruptFeatureMapError as e:
            log.error("Non-finite loss at step %d on sample %s", step, sample_id)
            raise NonFiniteLossError(f"Non-finite loss at step {step} (sample '{sample_id}', {branch} branch)") from e
        grads = backward(params, cache, result.grad)
        params, opt = sgd_step(params, grads, opt)
        ledger.record(step, branch, result.value, sample_id)
        if step % config.log_interval == 0:
            window = ledger.window_mean(config.log_interval)
            training_log.add(step, branch, result.value, window)
            log.debug("step %d %s loss %.6f window mean %.6f", step, branch, result.value, window)

    ledger.verify(branches, split)
    activations = {name: branch.activations for name, branch in branches.items()}
    log.info("Finished %d steps, branch activations %s", config.iterations, activations)
    if config.checkpoint_path:
        write_checkpoint(config.checkpoint_path, params)
    if config.log_path:
        training_log.write(config.log_path)
    return TrainingResult(params, opt, split, ledger, activations, training_log)
