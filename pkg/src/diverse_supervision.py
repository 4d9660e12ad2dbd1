"""
This script provides the command-line tool of the diverse-supervision toolkit: it
generates synthetic datasets, materializes box pseudo-labels, trains and evaluates the
toy segmentation network, runs the ablation grid and checks an ablation report against
the ordering claims with a Nagios-compatible output.

Domain failures are reported as a one-line error with exit code 1; click reports usage
errors with exit code 2. `check-ablation` exits with the Nagios codes 0-3 instead and
reports its own usage errors as UNKNOWN (3).

Usage:
    $ python -m src.diverse_supervision gen-data --out data/synth --count 600 --val 100 --seed 7
    $ python -m src.diverse_supervision make-masks --data data/synth --strategy ucm
    $ python -m src.diverse_supervision train --data data/synth --ratio 1:5:10 --iters 8000 \\
                                              --seed 0 --out runs/model.ckpt
    $ python -m src.diverse_supervision eval --ckpt runs/model.ckpt --data data/synth \\
                                             --report runs/eval.json
    $ python -m src.diverse_supervision ablate --data data/synth --seeds 5 --out runs/ablation
    $ python -m src.diverse_supervision check-ablation --report runs/ablation/ablation.json
"""

import functools
import logging
import os
import click
import nagiosplugin
import src.lib.logging_config as logging_config
from src.boxmask.strategies import BaseStrategy, UNIMPLEMENTED_BASELINES
from src.experiments.ablation import AblationPlan, DEFAULT_RATIOS, run_ablation
from src.experiments.pseudo_labels import make_masks as make_box_labels
from src.lib.config import Config
from src.lib.core import Dims
from src.metrics.evaluation import evaluate
from src.nagios.ablation_context import AblationClaimContext
from src.nagios.ablation_resource import (
    AblationClaimsResource,
    NagiosState,
    ReportStateResource,
    evaluate_claims,
    DEFAULT_MIN_MARGIN,
    DEFAULT_MIN_WINS,
    DEFAULT_RATIO,
)
from src.storage.checkpoint import read_checkpoint
from src.storage.dataset_layout import DatasetLayout
from src.storage.reports import read_json, write_eval_report
from src.synthdata.dataset import gen_dataset
from src.synthdata.scenes import SceneSpec
from src.trainer.splits import VARIANTS, variant_branches
from src.trainer.training import TrainConfig, train as train_network
from src.lib.exceptions import (
    AblationReportError,
    CheckpointArchitectureError,
    DiverseSupervisionError,
    StorageError,
)

STRATEGY_CHOICES = BaseStrategy.names() + list(UNIMPLEMENTED_BASELINES)

log = logging.getLogger(__name__)


def domain_errors(command):
    """
    Turns toolkit errors into click errors (exit code 1).
    """
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except DiverseSupervisionError as e:
            log.error("%s failed: %s", command.__name__, e)
            raise click.ClickException(str(e)) from e
    return wrapper


class NagiosCommand(click.Command):
    """
    A command whose usage errors exit UNKNOWN (3) with a Nagios status line; click's own
    usage exit code 2 would read as CRITICAL.
    """

    def parse_args(self, ctx, args):
        try:
            return super().parse_args(ctx, args)
        except click.UsageError as e:
            log.error("Usage Error: %s", e.format_message())
            click.echo(f"ABLATION UNKNOWN - {e.format_message()}")
            ctx.exit(NagiosState.UNKNOWN.value.code)


def split_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


@click.group()
@click.option('--log-level', default=None,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Override LOG_LEVEL for this invocation.')
def cli(log_level):
    """
    Learning semantic segmentation from pixel, box and image-level supervision.
    """
    if log_level:
        logging_config.configure(level=log_level)


@cli.command('gen-data')
@click.option('--out', required=True, help='Target dataset directory.')
@click.option('--count', default=600, show_default=True, type=click.IntRange(min=1), help='Training scenes.')
@click.option('--val', default=100, show_default=True, type=click.IntRange(min=1), help='Validation scenes.')
@click.option('--size', default=48, show_default=True, type=click.IntRange(min=16), help='Scene side in pixels.')
@click.option('--classes', default=4, show_default=True, type=click.IntRange(min=2), help='Object class count.')
@click.option('--seed', default=0, show_default=True, type=int, help='Dataset seed.')
@click.option('--overlap', default=0.3, show_default=True, type=click.FloatRange(0, 1),
              help='Probability that an object is placed against an earlier one.')
@domain_errors
def gen_data(out, count, val, size, classes, seed, overlap):
    """
    Generate a synthetic dataset with every label artifact.
    """
    spec = SceneSpec(dims=Dims(size, size), num_classes=classes, overlap_probability=overlap)
    gen_dataset(spec, count, val, seed, out)
    click.echo(f"Wrote {count} training and {val} validation scenes to {out}")


@cli.command('make-masks')
@click.option('--data', required=True, help='Dataset directory.')
@click.option('--strategy', default='ucm', show_default=True,
              type=click.Choice(STRATEGY_CHOICES, case_sensitive=False), help='Box pseudo-label strategy.')
@click.option('--alpha', default=Config.ALPHA_PERCENT, show_default=True, type=click.FloatRange(0, 100, min_open=True),
              help='Minimum confident-mask area in percent of the box.')
@click.option('--seed', default=0, show_default=True, type=int, help='Seed of randomized strategies.')
@domain_errors
def make_masks(data, strategy, alpha, seed):
    """
    Materialize box-branch labels for every box-annotated training sample.
    """
    summary = make_box_labels(data, strategy, alpha, seed)
    quality = summary["calibration"]
    mean_iou = "n/a" if quality["mean_iou"] is None else f"{quality['mean_iou']:.4f}"
    click.echo(f"{strategy}: {summary['samples']} labels, mean object IoU {mean_iou}, "
               f"{quality['fallbacks']} fallbacks")


@cli.command('train')
@click.option('--data', required=True, help='Dataset directory.')
@click.option('--ratio', default='1:5:10', show_default=True, help='Subset ratio pixel:box:image.')
@click.option('--iters', default=8000, show_default=True, type=click.IntRange(min=1), help='SGD steps.')
@click.option('--seed', default=0, show_default=True, type=int, help='Run seed.')
@click.option('--out', required=True, help='Checkpoint path; the training log goes next to it.')
@click.option('--lr', default=Config.LEARNING_RATE, show_default=True, type=float, help='Learning rate.')
@click.option('--momentum', default=Config.MOMENTUM, show_default=True, type=float, help='Momentum.')
@click.option('--weight-decay', default=Config.WEIGHT_DECAY, show_default=True, type=float, help='Weight decay.')
@click.option('--variant', default='p+b+i', show_default=True, help='Branches to train, e.g. p, p+b, p+b+i_ub.')
@click.option('--box-strategy', default='ucm', show_default=True,
              type=click.Choice(STRATEGY_CHOICES, case_sensitive=False), help='Box-branch label strategy.')
@domain_errors
def train(data, ratio, iters, seed, out, lr, momentum, weight_decay, variant, box_strategy):
    """
    Train the toy network and write a checkpoint plus its training log.
    """
    config = TrainConfig(
        ratio=ratio,
        iterations=iters,
        seed=seed,
        lr=lr,
        momentum=momentum,
        weight_decay=weight_decay,
        variant=variant,
        box_strategy=box_strategy,
        checkpoint_path=out,
        log_path=os.path.splitext(out)[0] + ".log",
    )
    dataset = DatasetLayout(data).load(box_strategy, variant_branches(config.variant))
    result = train_network(dataset, config)
    click.echo(f"Trained {iters} steps, branch activations {result.activations}, checkpoint {out}")


@cli.command('eval')
@click.option('--ckpt', required=True, help='Checkpoint path.')
@click.option('--data', required=True, help='Dataset directory.')
@click.option('--report', required=True, help='JSON report path; a .txt table is written next to it.')
@click.option('--split', default='val', show_default=True, type=click.Choice(['val', 'train']),
              help='Split to evaluate.')
@domain_errors
def eval_command(ckpt, data, report, split):
    """
    Evaluate a checkpoint on the validation split.
    """
    params = read_checkpoint(ckpt)
    dataset = DatasetLayout(data).load(strategy=None)
    if params.arch.num_classes != dataset.classes.num_object_classes:
        raise CheckpointArchitectureError(
            f"Checkpoint predicts {params.arch.num_classes} classes, dataset has "
            f"{dataset.classes.num_object_classes}")
    metrics = evaluate(params, dataset, split)
    write_eval_report(report, metrics)
    click.echo(" ".join(f"{key}={metrics[key]:.4f}" for key in ("pAcc", "mAcc", "mIU", "fwIU")))


@cli.command('ablate')
@click.option('--data', required=True, help='Dataset directory.')
@click.option('--ratios', default=",".join(DEFAULT_RATIOS), show_default=True, help='Comma-separated ratios.')
@click.option('--variants', default=",".join(VARIANTS), show_default=True, help='Comma-separated base variants.')
@click.option('--seeds', default=5, show_default=True, type=click.IntRange(min=1), help='Seeds per cell.')
@click.option('--iters', default=8000, show_default=True, type=click.IntRange(min=1), help='SGD steps per run.')
@click.option('--out', required=True, help='Report directory.')
@click.option('--upper-bound', is_flag=True, help='Also train the pixel-supervised twin of every variant.')
@click.option('--strategy-ratio', default='1:5:10', show_default=True, help='Ratio of the strategy grid.')
@click.option('--alpha', default=Config.ALPHA_PERCENT, show_default=True, type=click.FloatRange(0, 100, min_open=True),
              help='Minimum confident-mask area in percent of the box.')
@click.option('--workers', default=Config.ABLATION_WORKERS, show_default=True, type=click.IntRange(min=1),
              help='Worker processes.')
@domain_errors
def ablate(data, ratios, variants, seeds, iters, out, upper_bound, strategy_ratio, workers, alpha):
    """
    Run the variant grid, the strategy grid and the threshold study.
    """
    plan = AblationPlan(
        data_dir=data,
        ratios=tuple(split_list(ratios)),
        variants=tuple(split_list(variants)),
        seeds=seeds,
        iterations=iters,
        upper_bound=upper_bound,
        strategy_ratio=strategy_ratio,
        workers=workers,
        alpha=alpha,
    )
    report = run_ablation(plan, out)
    click.echo(f"Ablation report: {len(report['grid'])} grid cells, written to {out}")


@cli.command('check-ablation', cls=NagiosCommand)
@click.option('--report', required=True, help='Ablation JSON report.')
@click.option('--ratio', default=DEFAULT_RATIO, show_default=True, help='Ratio the ordering claims are checked at.')
@click.option('--min-margin', default=DEFAULT_MIN_MARGIN, show_default=True, type=float,
              help='Minimum mean mIU gain of p+b+i over p.')
@click.option('--min-wins', default=DEFAULT_MIN_WINS, show_default=True, type=int,
              help='Minimum seeds in which p+b+i beats p.')
def check_ablation(report, ratio, min_margin, min_wins):
    """
    Check an ablation report against the ordering claims and return a Nagios-compatible output.
    """
    custom_description = None
    try:
        claims = evaluate_claims(read_json(report), ratio, min_margin, min_wins)
        resource = AblationClaimsResource(claims)
        details = {claim.name: claim.detail for claim in claims}

    except StorageError as e:
        log.error("Report Error: %s", e)
        resource, details = ReportStateResource("UNKNOWN"), {}
        custom_description = "Unable to read the ablation report."

    except AblationReportError as e:
        log.error("Claim Error: %s", e)
        resource, details = ReportStateResource("UNKNOWN"), {}
        custom_description = f"Ablation report cannot be evaluated: {e}"

    check = nagiosplugin.Check(
        resource,
        AblationClaimContext(details=details, custom_description=custom_description)
    )
    check.name = 'ABLATION'
    check.main()


if __name__ == "__main__":
    cli()
